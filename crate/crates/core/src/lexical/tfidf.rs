use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::text::TokenizedDocument;
use crate::error::{Error, Result};

/// Sparse vector with strictly increasing column indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVec {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVec {
    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(i, x) in &self.entries {
            v[i] = x;
        }
        v
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, x)| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&(_, x)| x == 0.0)
    }
}

/// Smoothed inverse document frequency: idf(t) = ln((1 + N) / (1 + df(t))) + 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub vocabulary: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
    pub n_docs: usize,
}

impl TfidfModel {
    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    pub fn idf_of(&self, token: &str) -> Option<f64> {
        self.vocabulary.get(token).map(|&i| self.idf[i])
    }

    /// Raw in-vocabulary term counts.
    pub fn counts(&self, doc: &TokenizedDocument) -> SparseVec {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in &doc.tokens {
            if let Some(&i) = self.vocabulary.get(t) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        SparseVec {
            dim: self.dim(),
            entries: counts.into_iter().collect(),
        }
    }
}

pub fn tfidf_fit(docs: &[TokenizedDocument]) -> Result<TfidfModel> {
    let vocab: BTreeSet<&str> = docs.iter().flat_map(|d| d.tokens.iter().map(String::as_str)).collect();
    if vocab.is_empty() {
        return Err(Error::data("tf-idf needs at least one non-empty document"));
    }
    let vocabulary: BTreeMap<String, usize> = vocab.iter().enumerate().map(|(i, t)| (t.to_string(), i)).collect();
    let mut df = vec![0usize; vocabulary.len()];
    for d in docs {
        let uniq: BTreeSet<&str> = d.tokens.iter().map(String::as_str).collect();
        for t in uniq {
            df[vocabulary[t]] += 1;
        }
    }
    let n = docs.len() as f64;
    let idf = df.iter().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();
    Ok(TfidfModel {
        vocabulary,
        idf,
        n_docs: docs.len(),
    })
}

/// Counts × idf, L2-normalized. Out-of-vocabulary tokens are ignored.
pub fn tfidf_transform(doc: &TokenizedDocument, model: &TfidfModel) -> SparseVec {
    let mut v = model.counts(doc);
    for (i, x) in v.entries.iter_mut() {
        *x *= model.idf[*i];
    }
    let norm = v.norm();
    if norm > 0.0 {
        for (_, x) in v.entries.iter_mut() {
            *x /= norm;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn doc(tokens: &[&str]) -> TokenizedDocument {
        TokenizedDocument {
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            source_video: "v".into(),
        }
    }

    #[test]
    fn idf_values() {
        let m = tfidf_fit(&[doc(&["a", "b"]), doc(&["a"])]).unwrap();
        assert_eq!(m.idf_of("a"), Some(1.0));
        assert!((m.idf_of("b").unwrap() - ((3.0f64 / 2.0).ln() + 1.0)).abs() < 1e-15);
        assert!((m.idf_of("b").unwrap() - 1.40546).abs() < 1e-5);
        assert!(m.idf.iter().all(|&x| x >= 1.0 - 2f64.ln()));
        assert!(matches!(tfidf_fit(&[doc(&[])]), Err(Error::Data(_))));
    }

    #[test]
    fn transform_values() {
        let d = doc(&["a", "a", "b"]);
        let m = tfidf_fit(std::slice::from_ref(&d)).unwrap();
        let v = tfidf_transform(&d, &m).to_dense();
        assert!((v[0] - 2.0 / 5f64.sqrt()).abs() < 1e-12);
        assert!((v[0] - 0.89443).abs() < 1e-5 && (v[1] - 0.44721).abs() < 1e-5);
        assert!(tfidf_transform(&doc(&[]), &m).is_zero());
        assert!(tfidf_transform(&doc(&["zzz"]), &m).is_zero());
    }

    fn corpus() -> impl Strategy<Value = Vec<Vec<String>>> {
        prop::collection::vec(prop::collection::vec("[a-f]{1,2}", 0..12), 1..12)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn idf_matches_recount(docs in corpus()) {
            let docs: Vec<_> = docs.into_iter().map(|t| TokenizedDocument { tokens: t, source_video: "x".into() }).collect();
            prop_assume!(docs.iter().any(|d| !d.tokens.is_empty()));
            let m = tfidf_fit(&docs).unwrap();
            for (tok, &i) in &m.vocabulary {
                let df = docs.iter().filter(|d| d.tokens.iter().any(|t| t == tok)).count() as f64;
                let n = docs.len() as f64;
                let oracle = ((1.0 + n) / (1.0 + df)).ln() + 1.0;
                prop_assert!((m.idf[i] - oracle).abs() <= 1e-12);
            }
            let idx: HashSet<usize> = m.vocabulary.values().cloned().collect();
            prop_assert_eq!(idx, (0..m.dim()).collect::<HashSet<_>>());
            for d in &docs {
                let v = tfidf_transform(d, &m);
                if !v.is_zero() {
                    prop_assert!((v.norm() - 1.0).abs() <= 1e-12);
                }
                let mut rev = d.clone();
                rev.tokens.reverse();
                prop_assert_eq!(tfidf_transform(&rev, &m), v);
            }
        }
    }
}
