//! Small convolutional network: [3x3 conv, ReLU, 2x2 max-pool] per entry of
//! `channels`, then a ReLU dense layer and a single sigmoid output. Trained with
//! Adam on binary cross-entropy. Inputs are HWC rows of length size*size*3.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_training_set, sigmoid, Classifier};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnConfig {
    pub image_size: usize,
    pub channels: Vec<usize>,
    pub dense: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            image_size: 64,
            channels: vec![32, 64, 128, 128],
            dense: 128,
            learning_rate: 1e-4,
            batch_size: 32,
            epochs: 20,
            seed: 0,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.contains(&0) || self.dense == 0 {
            return Err(Error::usage("CNN needs at least one conv layer and nonzero widths"));
        }
        let div = 1usize << self.channels.len();
        if self.image_size < div || self.image_size % div != 0 {
            return Err(Error::usage(format!(
                "CNN image_size {} must be a positive multiple of {div} for {} pooling stages",
                self.image_size,
                self.channels.len()
            )));
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return Err(Error::usage("CNN learning_rate and batch_size must be positive"));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        self.image_size * self.image_size * 3
    }
}

struct ConvSlot {
    w: usize,
    b: usize,
    cin: usize,
    cout: usize,
    /// spatial size of the layer input (and conv output)
    size: usize,
}

/// Offsets of each parameter block inside the flat parameter vector.
struct Layout {
    convs: Vec<ConvSlot>,
    flat: usize,
    hidden: usize,
    d1_w: usize,
    d1_b: usize,
    d2_w: usize,
    d2_b: usize,
    total: usize,
}

impl Layout {
    fn new(cfg: &CnnConfig) -> Layout {
        let mut at = 0;
        let mut cin = 3;
        let mut size = cfg.image_size;
        let mut convs = Vec::new();
        for &cout in &cfg.channels {
            let w = at;
            at += cout * cin * 9;
            let b = at;
            at += cout;
            convs.push(ConvSlot { w, b, cin, cout, size });
            cin = cout;
            size /= 2;
        }
        let flat = cin * size * size;
        let hidden = cfg.dense;
        let d1_w = at;
        let d1_b = d1_w + hidden * flat;
        let d2_w = d1_b + hidden;
        let d2_b = d2_w + hidden;
        Layout {
            convs,
            flat,
            hidden,
            d1_w,
            d1_b,
            d2_w,
            d2_b,
            total: d2_b + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub params: Vec<f64>,
    /// Mean training cross-entropy per epoch.
    pub train_loss: Vec<f64>,
}

impl Classifier for CnnModel {
    fn input_dim(&self) -> usize {
        self.config.input_len()
    }
    fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::contract(format!("CNN expects {} inputs, got {}", self.input_dim(), x.len())));
        }
        let layout = Layout::new(&self.config);
        Ok(sigmoid(forward(&layout, &self.params, x).logit))
    }
}

fn hwc_to_chw(x: &[f64], size: usize) -> Vec<f64> {
    let plane = size * size;
    let mut out = vec![0.0; plane * 3];
    for (p, px) in x.chunks_exact(3).enumerate() {
        for c in 0..3 {
            out[c * plane + p] = px[c];
        }
    }
    out
}

/// Overlapping row ranges for a shift of `d` in {-1, 0, 1}: out[x] pairs with in[x + d].
#[inline]
fn shifted(s: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (s as isize - d.max(0)) as usize;
    (lo, hi)
}

fn conv_forward(input: &[f64], p: &[f64], slot: &ConvSlot, out: &mut [f64]) {
    let s = slot.size;
    let plane = s * s;
    for o in 0..slot.cout {
        let out_o = &mut out[o * plane..(o + 1) * plane];
        out_o.fill(p[slot.b + o]);
        for c in 0..slot.cin {
            let in_c = &input[c * plane..(c + 1) * plane];
            for ky in 0..3 {
                let dy = ky as isize - 1;
                let (y0, y1) = shifted(s, dy);
                for kx in 0..3 {
                    let dx = kx as isize - 1;
                    let (x0, x1) = shifted(s, dx);
                    let wv = p[slot.w + ((o * slot.cin + c) * 3 + ky) * 3 + kx];
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let src = &in_c[sy * s + (x0 as isize + dx) as usize..sy * s + (x1 as isize + dx) as usize];
                        let dst = &mut out_o[y * s + x0..y * s + x1];
                        for (d, v) in dst.iter_mut().zip(src) {
                            *d += wv * v;
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates weight and bias gradients into `g`; fills `din` when given.
fn conv_backward(input: &[f64], p: &[f64], slot: &ConvSlot, dout: &[f64], g: &mut [f64], mut din: Option<&mut [f64]>) {
    let s = slot.size;
    let plane = s * s;
    for o in 0..slot.cout {
        let dout_o = &dout[o * plane..(o + 1) * plane];
        g[slot.b + o] += dout_o.iter().sum::<f64>();
        for c in 0..slot.cin {
            let in_c = &input[c * plane..(c + 1) * plane];
            for ky in 0..3 {
                let dy = ky as isize - 1;
                let (y0, y1) = shifted(s, dy);
                for kx in 0..3 {
                    let dx = kx as isize - 1;
                    let (x0, x1) = shifted(s, dx);
                    let wi = slot.w + ((o * slot.cin + c) * 3 + ky) * 3 + kx;
                    let wv = p[wi];
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let lo = sy * s + (x0 as isize + dx) as usize;
                        let hi = sy * s + (x1 as isize + dx) as usize;
                        let d = &dout_o[y * s + x0..y * s + x1];
                        acc += d.iter().zip(&in_c[lo..hi]).map(|(a, b)| a * b).sum::<f64>();
                        if let Some(din) = din.as_deref_mut() {
                            let target = &mut din[c * plane + lo..c * plane + hi];
                            for (t, dv) in target.iter_mut().zip(d) {
                                *t += wv * dv;
                            }
                        }
                    }
                    g[wi] += acc;
                }
            }
        }
    }
}

/// 2x2 max-pool; returns pooled values and the flat index each one came from.
fn max_pool(input: &[f64], channels: usize, s: usize) -> (Vec<f64>, Vec<usize>) {
    let h = s / 2;
    let mut out = Vec::with_capacity(channels * h * h);
    let mut arg = Vec::with_capacity(channels * h * h);
    for c in 0..channels {
        let base = c * s * s;
        for y in 0..h {
            for x in 0..h {
                let cands = [
                    base + 2 * y * s + 2 * x,
                    base + 2 * y * s + 2 * x + 1,
                    base + (2 * y + 1) * s + 2 * x,
                    base + (2 * y + 1) * s + 2 * x + 1,
                ];
                let mut best = cands[0];
                for &k in &cands[1..] {
                    if input[k] > input[best] {
                        best = k;
                    }
                }
                out.push(input[best]);
                arg.push(best);
            }
        }
    }
    (out, arg)
}

struct Trace {
    /// Input of each conv layer (CHW).
    conv_in: Vec<Vec<f64>>,
    /// Pre-activation of each conv layer.
    conv_pre: Vec<Vec<f64>>,
    pool_arg: Vec<Vec<usize>>,
    flat: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    logit: f64,
}

fn forward(layout: &Layout, p: &[f64], x: &[f64]) -> Trace {
    let size0 = layout.convs[0].size;
    let mut a = hwc_to_chw(x, size0);
    let mut conv_in = Vec::new();
    let mut conv_pre = Vec::new();
    let mut pool_arg = Vec::new();
    for slot in &layout.convs {
        let mut z = vec![0.0; slot.cout * slot.size * slot.size];
        conv_forward(&a, p, slot, &mut z);
        let r: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
        let (pooled, arg) = max_pool(&r, slot.cout, slot.size);
        conv_in.push(std::mem::replace(&mut a, pooled));
        conv_pre.push(z);
        pool_arg.push(arg);
    }
    let flat = a;
    let hidden_pre: Vec<f64> = (0..layout.hidden)
        .map(|j| {
            let w = &p[layout.d1_w + j * layout.flat..layout.d1_w + (j + 1) * layout.flat];
            p[layout.d1_b + j] + w.iter().zip(&flat).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect();
    let hidden: Vec<f64> = hidden_pre.iter().map(|v| v.max(0.0)).collect();
    let logit = p[layout.d2_b]
        + p[layout.d2_w..layout.d2_w + layout.hidden]
            .iter()
            .zip(&hidden)
            .map(|(a, b)| a * b)
            .sum::<f64>();
    Trace {
        conv_in,
        conv_pre,
        pool_arg,
        flat,
        hidden_pre,
        hidden,
        logit,
    }
}

/// Binary cross-entropy from a logit, computed stably.
fn bce(logit: f64, y: f64) -> f64 {
    logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p()
}

/// Adds d(loss)/d(params) scaled by `scale` into `g`; returns the unscaled loss.
fn backprop(layout: &Layout, p: &[f64], x: &[f64], y: f64, scale: f64, g: &mut [f64]) -> f64 {
    let t = forward(layout, p, x);
    let prob = 1.0 / (1.0 + (-t.logit).exp());
    let dlogit = (prob - y) * scale;
    g[layout.d2_b] += dlogit;
    let mut dflat = vec![0.0; layout.flat];
    for j in 0..layout.hidden {
        g[layout.d2_w + j] += dlogit * t.hidden[j];
        if t.hidden_pre[j] <= 0.0 {
            continue;
        }
        let dh = dlogit * p[layout.d2_w + j];
        g[layout.d1_b + j] += dh;
        let row = layout.d1_w + j * layout.flat;
        for k in 0..layout.flat {
            g[row + k] += dh * t.flat[k];
            dflat[k] += dh * p[row + k];
        }
    }
    let mut dpooled = dflat;
    for (l, slot) in layout.convs.iter().enumerate().rev() {
        let mut dz = vec![0.0; slot.cout * slot.size * slot.size];
        for (k, &src) in t.pool_arg[l].iter().enumerate() {
            if t.conv_pre[l][src] > 0.0 {
                dz[src] += dpooled[k];
            }
        }
        if l == 0 {
            conv_backward(&t.conv_in[l], p, slot, &dz, g, None);
        } else {
            let mut din = vec![0.0; slot.cin * slot.size * slot.size];
            conv_backward(&t.conv_in[l], p, slot, &dz, g, Some(&mut din));
            dpooled = din;
        }
    }
    bce(t.logit, y)
}

fn init_params(layout: &Layout, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed, "cnn/init");
    let mut p = vec![0.0; layout.total];
    let mut fill = |range: std::ops::Range<usize>, fan_in: usize, gain: f64| {
        let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt()).expect("positive std");
        for v in &mut p[range] {
            *v = normal.sample(&mut rng);
        }
    };
    for slot in &layout.convs {
        fill(slot.w..slot.b, slot.cin * 9, 2.0);
    }
    fill(layout.d1_w..layout.d1_b, layout.flat, 2.0);
    fill(layout.d2_w..layout.d2_b, layout.hidden, 1.0);
    p
}

impl CnnModel {
    /// Untrained network with He-initialized weights.
    pub fn initialized(cfg: &CnnConfig) -> Result<CnnModel> {
        cfg.validate()?;
        Ok(CnnModel {
            config: cfg.clone(),
            params: init_params(&Layout::new(cfg), cfg.seed),
            train_loss: Vec::new(),
        })
    }

    /// Mean cross-entropy over `x` at `params`, and its gradient when asked.
    pub fn loss_at(&self, params: &[f64], x: &[Vec<f64>], y: &[Label], with_grad: bool) -> Result<(f64, Vec<f64>)> {
        let layout = Layout::new(&self.config);
        if params.len() != layout.total || x.len() != y.len() || x.is_empty() {
            return Err(Error::contract("parameter or batch shape mismatch"));
        }
        if let Some(r) = x.iter().find(|r| r.len() != self.config.input_len()) {
            return Err(Error::contract(format!("expected {} inputs, got {}", self.config.input_len(), r.len())));
        }
        let scale = 1.0 / x.len() as f64;
        let mut g = vec![0.0; if with_grad { layout.total } else { 0 }];
        let mut loss = 0.0;
        for (row, label) in x.iter().zip(y) {
            let t = label.as_index() as f64;
            loss += if with_grad {
                backprop(&layout, params, row, t, scale, &mut g)
            } else {
                bce(forward(&layout, params, row).logit, t)
            };
        }
        Ok((loss * scale, g))
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

pub fn cnn_train(x: &[Vec<f64>], y: &[Label], cfg: &CnnConfig) -> Result<CnnModel> {
    cfg.validate()?;
    let dim = check_training_set(x, y)?;
    if dim != cfg.input_len() {
        return Err(Error::contract(format!(
            "CNN expects {0}x{0}x3 images ({1} values), got rows of {dim}",
            cfg.image_size,
            cfg.input_len()
        )));
    }
    let layout = Layout::new(cfg);
    let mut params = init_params(&layout, cfg.seed);
    let mut m = vec![0.0; layout.total];
    let mut v = vec![0.0; layout.total];
    let mut g = vec![0.0; layout.total];
    let targets: Vec<f64> = y.iter().map(|l| l.as_index() as f64).collect();
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut step = 0i32;
    let mut train_loss = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut seed::rng(cfg.seed, &format!("cnn/epoch{epoch}")));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            g.fill(0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                epoch_loss += backprop(&layout, &params, &x[i], targets[i], scale, &mut g);
            }
            step += 1;
            let (c1, c2) = (1.0 - BETA1.powi(step), 1.0 - BETA2.powi(step));
            for k in 0..layout.total {
                m[k] = BETA1 * m[k] + (1.0 - BETA1) * g[k];
                v[k] = BETA2 * v[k] + (1.0 - BETA2) * g[k] * g[k];
                params[k] -= cfg.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPS);
            }
        }
        let mean = epoch_loss / x.len() as f64;
        if !mean.is_finite() {
            return Err(Error::numeric(format!("CNN loss became non-finite in epoch {epoch}")));
        }
        train_loss.push(mean);
    }
    Ok(CnnModel {
        config: cfg.clone(),
        params,
        train_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny() -> CnnConfig {
        CnnConfig {
            image_size: 8,
            channels: vec![2],
            dense: 4,
            ..Default::default()
        }
    }

    fn random_image(size: usize, seed_label: &str) -> Vec<f64> {
        let mut rng = seed::rng(5, seed_label);
        (0..size * size * 3).map(|_| rng.random::<f64>()).collect()
    }

    fn loss_at(layout: &Layout, p: &[f64], xs: &[Vec<f64>], ys: &[f64]) -> f64 {
        xs.iter().zip(ys).map(|(x, &y)| bce(forward(layout, p, x).logit, y)).sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cfg = tiny();
        let layout = Layout::new(&cfg);
        let params = init_params(&layout, 11);
        let xs = vec![random_image(8, "a"), random_image(8, "b")];
        let ys = [1.0, 0.0];
        let mut g = vec![0.0; layout.total];
        for (x, &y) in xs.iter().zip(&ys) {
            backprop(&layout, &params, x, y, 0.5, &mut g);
        }
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for k in 0..layout.total {
            let mut p = params.clone();
            p[k] += h;
            let up = loss_at(&layout, &p, &xs, &ys);
            p[k] -= 2.0 * h;
            let down = loss_at(&layout, &p, &xs, &ys);
            let numeric = (up - down) / (2.0 * h);
            let rel = (g[k] - numeric).abs() / g[k].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "worst relative gradient error {worst}");
    }

    #[test]
    fn overfits_bright_versus_dark() {
        let size = 16;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for k in 0..8 {
            let bright = k % 2 == 0;
            let mut rng = seed::rng(k, "toy");
            let (lo, hi) = if bright { (0.6, 1.0) } else { (0.0, 0.4) };
            xs.push((0..size * size * 3).map(|_| rng.random_range(lo..hi)).collect::<Vec<f64>>());
            ys.push(if bright { Label::Deceptive } else { Label::Truthful });
        }
        let cfg = CnnConfig {
            image_size: size,
            channels: vec![4, 8],
            dense: 16,
            learning_rate: 1e-3,
            batch_size: 4,
            epochs: 200,
            seed: 2,
        };
        let m = cnn_train(&xs, &ys, &cfg).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let p = m.predict("t", x).unwrap();
            assert_eq!(p.label, *y);
            assert!(p.score > 0.0 && p.score < 1.0);
        }
        assert!(m.train_loss.last().unwrap() < &m.train_loss[0]);
        let again = cnn_train(&xs, &ys, &cfg).unwrap();
        let drift = m.params.iter().zip(&again.params).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(drift <= 1e-6);
    }

    #[test]
    fn shape_errors() {
        let cfg = tiny();
        let xs = vec![vec![0.5; 10], vec![0.5; 10]];
        let ys = [Label::Truthful, Label::Deceptive];
        assert!(matches!(cnn_train(&xs, &ys, &cfg), Err(Error::Contract(_))));
        assert!(CnnConfig { image_size: 12, channels: vec![4, 4, 4], ..tiny() }.validate().is_err());
        let m = CnnModel {
            params: init_params(&Layout::new(&cfg), 0),
            config: cfg,
            train_loss: vec![],
        };
        assert!(matches!(m.predict("x", &[0.0; 5]), Err(Error::Contract(_))));
        let s = m.score(&random_image(8, "c")).unwrap();
        assert!(s > 0.0 && s < 1.0);
    }
}
