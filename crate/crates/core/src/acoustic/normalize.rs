use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Columns with a standard deviation below this are left unscaled.
pub const MIN_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub fitted_on: String,
}

/// Per-column mean and population standard deviation.
pub fn fit_normalizer(rows: &[Vec<f64>], fitted_on: &str) -> Result<NormStats> {
    let first = rows.first().ok_or_else(|| Error::data("cannot fit a normalizer on zero rows"))?;
    let dim = first.len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::contract("feature rows differ in width"));
    }
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for r in rows {
        for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let std = var
        .into_iter()
        .map(|v| {
            let s = (v / n).sqrt();
            if s < MIN_STD {
                1.0
            } else {
                s
            }
        })
        .collect();
    Ok(NormStats {
        mean,
        std,
        fitted_on: fitted_on.to_string(),
    })
}

pub fn apply_normalizer(rows: &[Vec<f64>], stats: &NormStats) -> Result<Vec<Vec<f64>>> {
    rows.iter()
        .map(|r| {
            if r.len() != stats.mean.len() {
                return Err(Error::contract("feature row width does not match the normalizer"));
            }
            Ok(r.iter()
                .zip(&stats.mean)
                .zip(&stats.std)
                .map(|((x, m), s)| (x - m) / s)
                .collect())
        })
        .collect()
}
