use serde::{Deserialize, Serialize};

use super::{check_training_set, Classifier};
use crate::error::{Error, Result};
use crate::label::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NbConfig {
    pub alpha: f64,
}

impl Default for NbConfig {
    fn default() -> Self {
        NbConfig { alpha: 1.0 }
    }
}

/// Multinomial naive Bayes over term counts. Index 0 is truthful, 1 deceptive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnbModel {
    pub config: NbConfig,
    pub log_prior: [f64; 2],
    pub log_likelihood: [Vec<f64>; 2],
}

impl MnbModel {
    /// Joint log probability per class.
    pub fn joint_log(&self, counts: &[f64]) -> Result<[f64; 2]> {
        if counts.len() != self.input_dim() {
            return Err(Error::contract(format!("MNB expects {} counts, got {}", self.input_dim(), counts.len())));
        }
        if counts.iter().any(|&c| c < 0.0 || !c.is_finite()) {
            return Err(Error::data("term counts must be finite and nonnegative"));
        }
        Ok([0, 1].map(|k| {
            self.log_prior[k]
                + counts
                    .iter()
                    .zip(&self.log_likelihood[k])
                    .filter(|(&c, _)| c > 0.0)
                    .map(|(c, l)| c * l)
                    .sum::<f64>()
        }))
    }

    /// Posterior [P(truthful), P(deceptive)].
    pub fn posterior(&self, counts: &[f64]) -> Result<[f64; 2]> {
        let [t, d] = self.joint_log(counts)?;
        let p_d = 1.0 / (1.0 + (t - d).exp());
        Ok([1.0 - p_d, p_d])
    }
}

impl Classifier for MnbModel {
    fn input_dim(&self) -> usize {
        self.log_likelihood[0].len()
    }
    fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(self.posterior(x)?[1])
    }
}

pub fn mnb_train(x: &[Vec<f64>], y: &[Label], cfg: &NbConfig) -> Result<MnbModel> {
    if !(cfg.alpha > 0.0) {
        return Err(Error::usage("naive Bayes smoothing alpha must be positive"));
    }
    let dim = check_training_set(x, y)?;
    if x.iter().flatten().any(|&c| c < 0.0) {
        return Err(Error::data("term counts must be nonnegative"));
    }
    let mut totals = [vec![0.0; dim], vec![0.0; dim]];
    let mut docs = [0usize; 2];
    for (row, label) in x.iter().zip(y) {
        let k = label.as_index();
        docs[k] += 1;
        for (t, c) in totals[k].iter_mut().zip(row) {
            *t += c;
        }
    }
    let n = x.len() as f64;
    let log_prior = [0, 1].map(|k| (docs[k] as f64 / n).ln());
    let log_likelihood = totals.map(|tot| {
        let denom = tot.iter().sum::<f64>() + cfg.alpha * dim as f64;
        tot.iter().map(|c| ((c + cfg.alpha) / denom).ln()).collect()
    });
    Ok(MnbModel {
        config: cfg.clone(),
        log_prior,
        log_likelihood,
    })
}
