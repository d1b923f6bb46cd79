//! CART trees shared by the forest (Gini) and boosting (squared error) models.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Flat node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Number of splits on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Targets are 0/1 class indicators.
    Gini,
    /// Targets are real residuals.
    SquaredError,
}

pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features examined per split; `None` means all.
    pub max_features: Option<usize>,
}

/// Per-node sufficient statistics over a weighted sample.
#[derive(Clone, Copy, Default)]
struct Stats {
    w: f64,
    sum: f64,
    sum_sq: f64,
}

impl Stats {
    fn add(&mut self, w: f64, t: f64) {
        self.w += w;
        self.sum += w * t;
        self.sum_sq += w * t * t;
    }

    fn sub(&mut self, w: f64, t: f64) {
        self.w -= w;
        self.sum -= w * t;
        self.sum_sq -= w * t * t;
    }

    /// Weighted impurity (Gini index or SSE) times node weight.
    fn cost(&self, criterion: Criterion) -> f64 {
        if self.w <= 0.0 {
            return 0.0;
        }
        match criterion {
            Criterion::Gini => {
                let p = self.sum / self.w;
                self.w * 2.0 * p * (1.0 - p)
            }
            Criterion::SquaredError => (self.sum_sq - self.sum * self.sum / self.w).max(0.0),
        }
    }
}

/// Grow a tree on `(rows, weight)` pairs; `leaf_value` maps a node's rows to its output.
pub fn grow<R: Rng>(
    x: &[Vec<f64>],
    target: &[f64],
    sample: Vec<(usize, f64)>,
    params: &TreeParams,
    rng: &mut R,
    leaf_value: &dyn Fn(&[(usize, f64)]) -> f64,
) -> Tree {
    let mut nodes = Vec::new();
    build(x, target, sample, 0, params, rng, leaf_value, &mut nodes);
    Tree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn build<R: Rng>(
    x: &[Vec<f64>],
    target: &[f64],
    sample: Vec<(usize, f64)>,
    depth: usize,
    params: &TreeParams,
    rng: &mut R,
    leaf_value: &dyn Fn(&[(usize, f64)]) -> f64,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    nodes.push(Node::Leaf {
        value: leaf_value(&sample),
    });
    let depth_ok = params.max_depth.is_none_or(|d| depth < d);
    if !depth_ok || sample.len() < params.min_samples_split.max(2) {
        return id;
    }
    let Some((feature, threshold)) = best_split(x, target, &sample, params, rng) else {
        return id;
    };
    let (l, r): (Vec<_>, Vec<_>) = sample.into_iter().partition(|&(i, _)| x[i][feature] <= threshold);
    let left = build(x, target, l, depth + 1, params, rng, leaf_value, nodes);
    let right = build(x, target, r, depth + 1, params, rng, leaf_value, nodes);
    nodes[id] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    id
}

fn best_split<R: Rng>(
    x: &[Vec<f64>],
    target: &[f64],
    sample: &[(usize, f64)],
    params: &TreeParams,
    rng: &mut R,
) -> Option<(usize, f64)> {
    let dim = x[sample[0].0].len();
    let features: Vec<usize> = match params.max_features {
        Some(k) if k < dim => {
            let mut f = sample_indices(rng, dim, k.max(1)).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..dim).collect(),
    };
    let mut total = Stats::default();
    for &(i, w) in sample {
        total.add(w, target[i]);
    }
    let parent = total.cost(params.criterion);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order: Vec<(usize, f64)> = sample.to_vec();
    for &f in &features {
        order.sort_by(|a, b| x[a.0][f].total_cmp(&x[b.0][f]));
        let mut left = Stats::default();
        let mut right = total;
        for k in 0..order.len() - 1 {
            let (i, w) = order[k];
            left.add(w, target[i]);
            right.sub(w, target[i]);
            let (v, next) = (x[i][f], x[order[k + 1].0][f]);
            if v == next {
                continue;
            }
            let cost = left.cost(params.criterion) + right.cost(params.criterion);
            let gain = parent - cost;
            if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                let mid = v + (next - v) / 2.0;
                best = Some((gain, f, if mid < next { mid } else { v }));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}
