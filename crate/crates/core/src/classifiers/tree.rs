use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FitInfo, Hyperparams, Params};
use crate::linalg::Matrix;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf { value: f64 },
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Binary tree stored as a node array with the root at index 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = alloc::vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            match self.nodes[i] {
                TreeNode::Leaf { .. } => best = best.max(d),
                TreeNode::Split { left, right, .. } => {
                    stack.push((left, d + 1));
                    stack.push((right, d + 1));
                }
            }
        }
        best
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }
}

pub(crate) struct Grow {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features tried per split; all remaining features are tried when
    /// none of the sampled ones admits a split.
    pub mtry: usize,
}

struct Best {
    feature: usize,
    threshold: f64,
    cut: usize,
    cost: f64,
}

/// Sum of squared deviations from the mean, from running sums.
fn sse(n: f64, s: f64, ss: f64) -> f64 {
    (ss - s * s / n).max(0.0)
}

fn best_split(x: &Matrix, target: &[f64], idx: &[usize], features: &[usize], min_leaf: usize, parent: f64) -> Option<Best> {
    let n = idx.len();
    let mut best: Option<Best> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    let (tot_s, tot_ss) = idx.iter().fold((0.0, 0.0), |(s, ss), &i| (s + target[i], ss + target[i] * target[i]));
    for &f in features {
        pairs.clear();
        pairs.extend(idx.iter().map(|&i| (x[(i, f)], target[i])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut s, mut ss) = (0.0, 0.0);
        for k in 1..n {
            let t = pairs[k - 1].1;
            s += t;
            ss += t * t;
            if k < min_leaf || n - k < min_leaf || pairs[k - 1].0 >= pairs[k].0 {
                continue;
            }
            let cost = sse(k as f64, s, ss) + sse((n - k) as f64, tot_s - s, tot_ss - ss);
            if cost < parent - 1e-12 && best.as_ref().is_none_or(|b| cost < b.cost) {
                let (lo, hi) = (pairs[k - 1].0, pairs[k].0);
                let mid = lo + (hi - lo) / 2.0;
                best = Some(Best {
                    feature: f,
                    threshold: if mid < hi { mid } else { lo },
                    cut: k,
                    cost,
                });
            }
        }
    }
    best
}

/// Grows a least-squares regression tree on `target` over the row multiset
/// `idx`. On 0/1 targets the squared-error criterion ranks splits exactly as
/// Gini impurity does. Leaf values come from `leaf_value(rows)`.
pub(crate) fn grow(
    x: &Matrix,
    target: &[f64],
    idx: Vec<usize>,
    p: &Grow,
    g: &mut ChaCha8Rng,
    leaf_value: &dyn Fn(&[usize]) -> f64,
) -> Tree {
    let d = x.cols();
    let mut nodes = alloc::vec![TreeNode::Leaf { value: 0.0 }];
    let mut stack = alloc::vec![(0usize, idx, 0usize)];
    while let Some((slot, rows, depth)) = stack.pop() {
        let n = rows.len() as f64;
        let (s, ss) = rows.iter().fold((0.0, 0.0), |(s, ss), &i| (s + target[i], ss + target[i] * target[i]));
        let parent = sse(n, s, ss);
        let can_split = rows.len() >= 2 * p.min_samples_leaf
            && p.max_depth.is_none_or(|m| depth < m)
            && parent > 1e-12;
        let mut best = None;
        if can_split {
            let tried: Vec<usize> = if p.mtry >= d {
                (0..d).collect()
            } else {
                sample(g, d, p.mtry).into_vec()
            };
            best = best_split(x, target, &rows, &tried, p.min_samples_leaf, parent);
            if best.is_none() && tried.len() < d {
                let rest: Vec<usize> = (0..d).filter(|f| !tried.contains(f)).collect();
                best = best_split(x, target, &rows, &rest, p.min_samples_leaf, parent);
            }
        }
        match best {
            None => nodes[slot] = TreeNode::Leaf { value: leaf_value(&rows) },
            Some(b) => {
                let (left, right): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| x[(i, b.feature)] <= b.threshold);
                debug_assert_eq!(left.len(), b.cut);
                let (l, r) = (nodes.len(), nodes.len() + 1);
                nodes.push(TreeNode::Leaf { value: 0.0 });
                nodes.push(TreeNode::Leaf { value: 0.0 });
                nodes[slot] = TreeNode::Split {
                    feature: b.feature,
                    threshold: b.threshold,
                    left: l,
                    right: r,
                };
                stack.push((r, right, depth + 1));
                stack.push((l, left, depth + 1));
            }
        }
    }
    Tree { nodes }
}

fn class_tree(x: &Matrix, target: &[f64], idx: Vec<usize>, p: &Grow, g: &mut ChaCha8Rng) -> Tree {
    let mean = |rows: &[usize]| rows.iter().map(|&i| target[i]).sum::<f64>() / rows.len() as f64;
    grow(x, target, idx, p, g, &mean)
}

fn mtry(d: usize, fraction: f64) -> usize {
    (libm::round(fraction * d as f64) as usize).clamp(1, d)
}

/// CART classification tree; leaves hold the class-1 fraction.
pub(super) fn fit_single(x: &Matrix, y: &[u8], h: &Hyperparams, seed: u64) -> (Params, FitInfo) {
    let target: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();
    let p = Grow {
        max_depth: h.max_depth,
        min_samples_leaf: h.min_samples_leaf.unwrap_or(1),
        mtry: mtry(x.cols(), h.feature_fraction.unwrap_or(1.0)),
    };
    let mut g = rng::seeded(seed, 0xD7);
    let t = class_tree(x, &target, (0..x.rows()).collect(), &p, &mut g);
    let info = FitInfo {
        iterations: t.depth(),
        ..FitInfo::default()
    };
    (Params::Tree(t), info)
}

/// Random forest: bootstrap rows (unless disabled) and a random feature
/// subset per split, about `sqrt(d)` features by default. Each tree draws
/// from its own stream of the seed.
pub(super) fn fit_forest(x: &Matrix, y: &[u8], h: &Hyperparams, seed: u64) -> (Params, FitInfo) {
    let target: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();
    let d = x.cols();
    let n_trees = h.n_trees.unwrap_or(100);
    let bootstrap = h.bootstrap.unwrap_or(true);
    let p = Grow {
        max_depth: h.max_depth,
        min_samples_leaf: h.min_samples_leaf.unwrap_or(1),
        mtry: match h.feature_fraction {
            Some(f) => mtry(d, f),
            None => (libm::sqrt(d as f64) as usize).max(1),
        },
    };
    let n = x.rows();
    let trees = (0..n_trees as u64)
        .map(|t| {
            let mut g = rng::seeded(seed, 0xF0_0000 + t);
            let idx = if bootstrap {
                (0..n).map(|_| g.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            class_tree(x, &target, idx, &p, &mut g)
        })
        .collect();
    (Params::Forest { trees }, FitInfo { iterations: n_trees, ..FitInfo::default() })
}
