//! Gradient boosting with logistic loss and Newton-step leaf values.

use serde::{Deserialize, Serialize};

use super::tree::{grow, Criterion, Tree, TreeParams};
use super::{check_training_set, sigmoid, Classifier};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            n_estimators: 100,
            learning_rate: 0.1,
            max_depth: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub config: BoostConfig,
    /// Initial log-odds of the deceptive class.
    pub init: f64,
    /// Each tree with the multiplier it was added with.
    pub stages: Vec<(Tree, f64)>,
    /// Mean training log-loss after initialization and after each stage.
    pub train_loss: Vec<f64>,
    pub dim: usize,
}

impl BoostModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.init + self.stages.iter().map(|(t, m)| m * t.eval(x)).sum::<f64>()
    }
}

impl Classifier for BoostModel {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::contract(format!("boosting expects {} features, got {}", self.dim, x.len())));
        }
        Ok(sigmoid(self.margin(x)))
    }
}

fn log_loss(f: &[f64], y: &[f64]) -> f64 {
    // log(1 + e^f) - y f, computed stably
    let total: f64 = f
        .iter()
        .zip(y)
        .map(|(&fi, &yi)| fi.max(0.0) + (-fi.abs()).exp().ln_1p() - yi * fi)
        .sum();
    total / f.len() as f64
}

const MAX_HALVINGS: usize = 30;

pub fn boost_train(x: &[Vec<f64>], y: &[Label], cfg: &BoostConfig) -> Result<BoostModel> {
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::usage("boosting learning_rate must be positive"));
    }
    if cfg.max_depth == 0 {
        return Err(Error::usage("boosting max_depth must be at least 1"));
    }
    let dim = check_training_set(x, y)?;
    let n = x.len();
    let target: Vec<f64> = y.iter().map(|l| l.as_index() as f64).collect();
    let p0 = target.iter().sum::<f64>() / n as f64;
    let init = (p0 / (1.0 - p0)).ln();
    let mut f = vec![init; n];
    let mut train_loss = vec![log_loss(&f, &target)];
    let params = TreeParams {
        criterion: Criterion::SquaredError,
        max_depth: Some(cfg.max_depth),
        min_samples_split: 2,
        max_features: None,
    };
    let mut rng = seed::rng(cfg.seed, "boost");
    let mut stages = Vec::with_capacity(cfg.n_estimators);
    for _ in 0..cfg.n_estimators {
        let p: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
        let residual: Vec<f64> = target.iter().zip(&p).map(|(t, p)| t - p).collect();
        let leaf = |s: &[(usize, f64)]| {
            let num: f64 = s.iter().map(|&(i, _)| residual[i]).sum();
            let den: f64 = s.iter().map(|&(i, _)| p[i] * (1.0 - p[i])).sum();
            if den < 1e-12 {
                0.0
            } else {
                num / den
            }
        };
        let tree = grow(x, &residual, (0..n).map(|i| (i, 1.0)).collect(), &params, &mut rng, &leaf);
        let step: Vec<f64> = x.iter().map(|r| tree.eval(r)).collect();
        let prev = *train_loss.last().expect("loss history starts non-empty");
        // shrink the step until the training loss does not go up
        let mut mult = cfg.learning_rate;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = f.iter().zip(&step).map(|(a, s)| a + mult * s).collect();
            let loss = log_loss(&cand, &target);
            if loss <= prev {
                accepted = Some((cand, loss));
                break;
            }
            mult /= 2.0;
        }
        let (cand, loss) = accepted.unwrap_or_else(|| {
            mult = 0.0;
            (f.clone(), prev)
        });
        if !loss.is_finite() {
            return Err(Error::numeric("boosting training loss is not finite"));
        }
        f = cand;
        train_loss.push(loss);
        stages.push((tree, mult));
    }
    Ok(BoostModel {
        config: cfg.clone(),
        init,
        stages,
        train_loss,
        dim,
    })
}
