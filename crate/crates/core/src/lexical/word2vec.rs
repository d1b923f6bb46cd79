//! Skip-gram word embeddings trained with negative sampling.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::text::TokenizedDocument;
use super::tfidf::{tfidf_transform, TfidfModel};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub window: usize,
    pub negative: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 100,
            window: 5,
            negative: 5,
            epochs: 20,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
    pub config: EmbeddingConfig,
}

impl EmbeddingTable {
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        let (x, y) = (self.get(a)?, self.get(b)?);
        let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        Some(dot / (nx * ny))
    }
}

const UNIGRAM_POWER: f64 = 0.75;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Cumulative unigram^0.75 distribution for drawing negatives.
fn noise_cdf(counts: &[usize]) -> Vec<f64> {
    let mut acc = 0.0;
    let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(UNIGRAM_POWER)).collect();
    let total: f64 = weights.iter().sum();
    weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect()
}

pub fn train_word_embeddings(docs: &[TokenizedDocument], config: &EmbeddingConfig) -> Result<EmbeddingTable> {
    if config.dim == 0 || config.window == 0 {
        return Err(Error::usage("embedding dim and window must be positive"));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for d in docs {
        for t in &d.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    if counts.len() < 2 {
        return Err(Error::data("embedding corpus needs at least 2 distinct tokens"));
    }
    let index: BTreeMap<&str, usize> = counts.keys().enumerate().map(|(i, t)| (*t, i)).collect();
    let freq: Vec<usize> = counts.values().cloned().collect();
    let cdf = noise_cdf(&freq);
    let v = index.len();
    let dim = config.dim;

    let mut rng = seed::rng(config.seed, "word2vec");
    let mut input: Vec<f64> = (0..v * dim).map(|_| (rng.random::<f64>() - 0.5) / dim as f64).collect();
    let mut output = vec![0.0; v * dim];
    let sentences: Vec<Vec<usize>> = docs
        .iter()
        .map(|d| d.tokens.iter().map(|t| index[t.as_str()]).collect())
        .collect();

    let total_steps = (config.epochs * sentences.iter().map(Vec::len).sum::<usize>()).max(1);
    let mut step = 0usize;
    let mut grad = vec![0.0; dim];
    for _ in 0..config.epochs {
        for sent in &sentences {
            for (pos, &center) in sent.iter().enumerate() {
                let lr = (config.learning_rate * (1.0 - step as f64 / total_steps as f64)).max(config.learning_rate * 1e-4);
                step += 1;
                let reach = rng.random_range(1..=config.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(sent.len() - 1);
                for (cpos, &context) in sent.iter().enumerate().take(hi + 1).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let center_vec = center * dim..(center + 1) * dim;
                    for k in 0..=config.negative {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let u: f64 = rng.random();
                            let t = cdf.partition_point(|&c| c < u).min(v - 1);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let out = target * dim..(target + 1) * dim;
                        let score: f64 = input[center_vec.clone()].iter().zip(&output[out.clone()]).map(|(a, b)| a * b).sum();
                        let g = (label - sigmoid(score)) * lr;
                        for ((gi, o), x) in grad.iter_mut().zip(&mut output[out]).zip(&input[center_vec.clone()]) {
                            *gi += g * *o;
                            *o += g * x;
                        }
                    }
                    for (x, gi) in input[center_vec].iter_mut().zip(&grad) {
                        *x += gi;
                    }
                }
            }
        }
    }
    if input.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("word embedding training diverged"));
    }
    let vectors = index
        .iter()
        .map(|(t, &i)| (t.to_string(), input[i * dim..(i + 1) * dim].to_vec()))
        .collect();
    Ok(EmbeddingTable {
        dim,
        vectors,
        config: config.clone(),
    })
}

/// TF-IDF weighted mean of word vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocEmbedding {
    pub values: Vec<f64>,
    /// True for empty or all-out-of-vocabulary documents; `values` is then zero.
    pub abstain: bool,
}

/// v(d) = sum_t w(t) * tfidf(t, d) / sum_t tfidf(t, d), over tokens known to both models.
pub fn embed_document(doc: &TokenizedDocument, tfidf: &TfidfModel, emb: &EmbeddingTable) -> DocEmbedding {
    let weights = tfidf_transform(doc, tfidf);
    let by_index: BTreeMap<usize, &str> = tfidf.vocabulary.iter().map(|(t, &i)| (i, t.as_str())).collect();
    let pairs: Vec<(&[f64], f64)> = weights
        .entries
        .iter()
        .filter_map(|&(i, w)| emb.get(by_index[&i]).map(|v| (v, w)))
        .collect();
    weighted_mean(&pairs, emb.dim)
}

pub fn weighted_mean(pairs: &[(&[f64], f64)], dim: usize) -> DocEmbedding {
    let total: f64 = pairs.iter().map(|(_, w)| w).sum();
    let mut values = vec![0.0; dim];
    if pairs.is_empty() || total <= 0.0 {
        return DocEmbedding { values, abstain: true };
    }
    for (v, w) in pairs {
        for (acc, x) in values.iter_mut().zip(v.iter()) {
            *acc += w * x;
        }
    }
    values.iter_mut().for_each(|x| *x /= total);
    DocEmbedding { values, abstain: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(text: &str) -> TokenizedDocument {
        TokenizedDocument {
            tokens: text.split_whitespace().map(str::to_string).collect(),
            source_video: "v".into(),
        }
    }

    fn corpus() -> Vec<TokenizedDocument> {
        let mut docs = Vec::new();
        for i in 0..30 {
            docs.push(doc(&format!("alpha beta red blue alpha beta green{}", i % 3)));
            docs.push(doc(&format!("gamma delta stone river gamma delta hill{}", i % 3)));
        }
        docs
    }

    #[test]
    fn co_occurring_words_end_up_closer() {
        let table = train_word_embeddings(&corpus(), &EmbeddingConfig { dim: 20, epochs: 30, ..Default::default() }).unwrap();
        let ab = table.cosine("alpha", "beta").unwrap();
        let ag = table.cosine("alpha", "gamma").unwrap();
        assert!(ab > ag, "cos(alpha,beta)={ab} cos(alpha,gamma)={ag}");
    }

    #[test]
    fn shape_and_determinism() {
        let cfg = EmbeddingConfig { epochs: 2, ..Default::default() };
        let a = train_word_embeddings(&corpus(), &cfg).unwrap();
        let b = train_word_embeddings(&corpus(), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.vectors.values().all(|v| v.len() == 100 && v.iter().all(|x| x.is_finite())));
        assert_eq!(a.vectors.len(), 14);
        assert!(matches!(train_word_embeddings(&[doc("same same")], &cfg), Err(Error::Data(_))));
    }

    #[test]
    fn embedding_examples() {
        let e1 = [1.0, 0.0];
        let e2 = [0.0, 1.0];
        let out = weighted_mean(&[(&e1, 0.3), (&e2, 0.3)], 2);
        assert_eq!(out.values, vec![0.5, 0.5]);
        let same = [0.25, -2.0];
        let out = weighted_mean(&[(&same, 0.1), (&same, 0.7), (&same, 3.0)], 2);
        for (a, b) in out.values.iter().zip(same) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(weighted_mean(&[], 2).abstain);

        let docs = corpus();
        let cfg = EmbeddingConfig { dim: 8, epochs: 1, ..Default::default() };
        let table = train_word_embeddings(&docs, &cfg).unwrap();
        let model = crate::lexical::tfidf_fit(&docs).unwrap();
        let e = embed_document(&doc("zzz yyy"), &model, &table);
        assert!(e.abstain && e.values.iter().all(|&x| x == 0.0));
        assert!(!embed_document(&docs[0], &model, &table).abstain);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn weighted_mean_matches_oracle_and_is_scale_invariant(
            rows in prop::collection::vec((prop::collection::vec(-5.0f64..5.0, 3), 0.01f64..4.0), 1..8),
            c in 0.1f64..50.0,
        ) {
            let pairs: Vec<(&[f64], f64)> = rows.iter().map(|(v, w)| (v.as_slice(), *w)).collect();
            let out = weighted_mean(&pairs, 3);
            for k in 0..3 {
                let num: f64 = rows.iter().map(|(v, w)| v[k] * w).sum();
                let den: f64 = rows.iter().map(|(_, w)| w).sum();
                prop_assert!((out.values[k] - num / den).abs() <= 1e-12);
            }
            let scaled: Vec<(&[f64], f64)> = rows.iter().map(|(v, w)| (v.as_slice(), w * c)).collect();
            let out2 = weighted_mean(&scaled, 3);
            for k in 0..3 {
                prop_assert!((out.values[k] - out2.values[k]).abs() <= 1e-12);
            }
        }
    }
}
