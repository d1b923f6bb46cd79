//! Kernel SVM trained with an SMO dual solver (maximal-violating-pair selection
//! using second-order information).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{check_training_set, sigmoid, Classifier};
use crate::error::{Error, Result};
use crate::label::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Rbf,
    Poly,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    #[serde(rename = "C")]
    pub c: f64,
    pub kernel: Kernel,
    pub gamma: f64,
    pub coef0: f64,
    pub degree: u32,
    pub tol: f64,
    /// Upper bound on SMO iterations.
    pub max_passes: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            kernel: Kernel::Rbf,
            gamma: 1.0,
            coef0: 0.0,
            degree: 3,
            tol: 1e-3,
            max_passes: 1_000_000,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::usage("SVM C must be positive"));
        }
        if self.kernel != Kernel::Linear && !(self.gamma > 0.0) {
            return Err(Error::usage("SVM gamma must be positive"));
        }
        if self.degree == 0 {
            return Err(Error::usage("SVM degree must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::usage("SVM tol must be positive"));
        }
        Ok(())
    }
}

pub fn kernel_eval(cfg: &SvmConfig, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::contract(format!("kernel inputs have lengths {} and {}", x.len(), y.len())));
    }
    Ok(kernel_unchecked(cfg, x, y))
}

fn kernel_unchecked(cfg: &SvmConfig, x: &[f64], y: &[f64]) -> f64 {
    match cfg.kernel {
        Kernel::Rbf => {
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            (-cfg.gamma * d2).exp()
        }
        Kernel::Poly => (cfg.gamma * dot(x, y) + cfg.coef0).powi(cfg.degree as i32),
        Kernel::Linear => dot(x, y),
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub config: SvmConfig,
    pub support_vectors: Vec<Vec<f64>>,
    /// ±1 per support vector.
    pub labels: Vec<f64>,
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub dim: usize,
    pub iterations: usize,
}

impl SvmModel {
    /// f(x) = sum_i alpha_i y_i K(x_i, x) + b
    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::contract(format!("SVM expects {} features, got {}", self.dim, x.len())));
        }
        let s: f64 = self
            .support_vectors
            .iter()
            .zip(self.labels.iter().zip(&self.alphas))
            .map(|(sv, (y, a))| a * y * kernel_unchecked(&self.config, sv, x))
            .sum();
        Ok(s + self.bias)
    }
}

impl Classifier for SvmModel {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.margin(x)?))
    }
}

/// Rows of the kernel matrix computed on demand and kept up to a fixed budget.
struct KernelRows<'a> {
    x: &'a [Vec<f64>],
    cfg: &'a SvmConfig,
    rows: HashMap<usize, Vec<f64>>,
    order: Vec<usize>,
    capacity: usize,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a [Vec<f64>], cfg: &'a SvmConfig) -> Self {
        const BUDGET_VALUES: usize = 64 << 20;
        KernelRows {
            x,
            cfg,
            rows: HashMap::new(),
            order: Vec::new(),
            capacity: (BUDGET_VALUES / x.len().max(1)).max(2),
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if !self.rows.contains_key(&i) {
            if self.rows.len() >= self.capacity {
                let evict = self.order.remove(0);
                self.rows.remove(&evict);
            }
            let r = self.x.iter().map(|xj| kernel_unchecked(self.cfg, &self.x[i], xj)).collect();
            self.rows.insert(i, r);
            self.order.push(i);
        }
        &self.rows[&i]
    }
}

const TAU: f64 = 1e-12;

pub fn svm_train(x: &[Vec<f64>], y: &[Label], cfg: &SvmConfig) -> Result<SvmModel> {
    cfg.validate()?;
    let dim = check_training_set(x, y)?;
    let n = x.len();
    let ys: Vec<f64> = y.iter().map(|l| l.as_sign()).collect();
    let c = cfg.c;
    let diag: Vec<f64> = x.iter().map(|xi| kernel_unchecked(cfg, xi, xi)).collect();
    let mut kr = KernelRows::new(x, cfg);
    let mut alpha = vec![0.0; n];
    // gradient of 1/2 a'Qa - e'a with Q_ij = y_i y_j K_ij
    let mut grad = vec![-1.0; n];

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    while iterations < cfg.max_passes {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], ys[t]) && -ys[t] * grad[t] >= gmax {
                gmax = -ys[t] * grad[t];
                i = t;
            }
        }
        if i == usize::MAX {
            break;
        }
        let ki = kr.row(i).to_vec();
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], ys[t]) {
                continue;
            }
            let yg = ys[t] * grad[t];
            gmax2 = gmax2.max(yg);
            let b = gmax + yg;
            if b > 0.0 {
                let a = diag[i] + diag[t] - 2.0 * ki[t];
                let obj = -(b * b) / if a > 0.0 { a } else { TAU };
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < cfg.tol || j == usize::MAX {
            break;
        }
        iterations += 1;
        let kj = kr.row(j).to_vec();
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let quad = (diag[i] + diag[j] - 2.0 * ki[j]).max(TAU);
        if ys[i] != ys[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (dai, daj) = (alpha[i] - ai_old, alpha[j] - aj_old);
        for t in 0..n {
            grad[t] += ys[t] * (ys[i] * ki[t] * dai + ys[j] * kj[t] * daj);
        }
    }

    // bias from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = ys[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    if !rho.is_finite() || alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::numeric("SVM solver produced non-finite coefficients"));
    }

    let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    Ok(SvmModel {
        config: cfg.clone(),
        support_vectors: sv.iter().map(|&t| x[t].clone()).collect(),
        labels: sv.iter().map(|&t| ys[t]).collect(),
        alphas: sv.iter().map(|&t| alpha[t]).collect(),
        bias: -rho,
        dim,
        iterations,
    })
}
