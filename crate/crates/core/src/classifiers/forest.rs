use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Criterion, Tree, TreeParams};
use super::{check_training_set, Classifier};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// Random forest; the score is the fraction of trees voting deceptive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub trees: Vec<Tree>,
    pub dim: usize,
}

impl Classifier for ForestModel {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::contract(format!("forest expects {} features, got {}", self.dim, x.len())));
        }
        let votes = self
            .trees
            .iter()
            .filter(|t| Label::from_score(t.eval(x)) == Label::Deceptive)
            .count();
        Ok(votes as f64 / self.trees.len() as f64)
    }
}

pub fn forest_train(x: &[Vec<f64>], y: &[Label], cfg: &ForestConfig) -> Result<ForestModel> {
    if cfg.n_trees == 0 {
        return Err(Error::usage("forest needs at least one tree"));
    }
    if cfg.max_depth == Some(0) {
        return Err(Error::usage("forest max_depth must be at least 1"));
    }
    let dim = check_training_set(x, y)?;
    let target: Vec<f64> = y.iter().map(|l| l.as_index() as f64).collect();
    let params = TreeParams {
        criterion: Criterion::Gini,
        max_depth: cfg.max_depth,
        min_samples_split: 2,
        max_features: Some(((dim as f64).sqrt().floor() as usize).max(1)),
    };
    let leaf = |s: &[(usize, f64)]| {
        let w: f64 = s.iter().map(|p| p.1).sum();
        s.iter().map(|&(i, wi)| wi * target[i]).sum::<f64>() / w
    };
    let n = x.len();
    let trees = (0..cfg.n_trees)
        .map(|t| {
            let mut rng = seed::rng(cfg.seed, &format!("forest/tree{t}"));
            let sample = if cfg.bootstrap {
                let mut counts = vec![0usize; n];
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1;
                }
                counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(i, &c)| (i, c as f64))
                    .collect()
            } else {
                (0..n).map(|i| (i, 1.0)).collect()
            };
            grow(x, &target, sample, &params, &mut rng, &leaf)
        })
        .collect();
    Ok(ForestModel {
        config: cfg.clone(),
        trees,
        dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::testdata;
    use proptest::prelude::*;

    #[test]
    fn separable_line_single_stump() {
        let (x, y) = testdata::line();
        let cfg = ForestConfig { n_trees: 1, max_depth: Some(1), bootstrap: false, seed: 3 };
        let m = forest_train(&x, &y, &cfg).unwrap();
        assert_eq!(m.trees[0].depth(), 1);
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(m.predict("u", xi).unwrap().label, *yi);
        }
        assert!(matches!(forest_train(&x, &vec![Label::Truthful; x.len()], &cfg), Err(Error::Data(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn depth_cap_scores_and_determinism(
            rows in prop::collection::vec((prop::collection::vec(-3.0f64..3.0, 4), any::<bool>()), 4..40),
            depth in 1usize..5,
            seed in any::<u64>(),
        ) {
            let x: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
            let mut y: Vec<Label> = rows.iter().map(|r| if r.1 { Label::Deceptive } else { Label::Truthful }).collect();
            y[0] = Label::Truthful;
            y[1] = Label::Deceptive;
            let cfg = ForestConfig { n_trees: 7, max_depth: Some(depth), bootstrap: true, seed };
            let m = forest_train(&x, &y, &cfg).unwrap();
            prop_assert!(m.trees.iter().all(|t| t.depth() <= depth));
            for xi in &x {
                let s = m.score(xi).unwrap();
                prop_assert!((0.0..=1.0).contains(&s));
                prop_assert!((s * 7.0 - (s * 7.0).round()).abs() < 1e-9);
            }
            prop_assert_eq!(forest_train(&x, &y, &cfg).unwrap(), m);
        }
    }
}
