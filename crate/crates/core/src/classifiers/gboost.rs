use alloc::vec::Vec;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Grow, Tree};
use super::{logit_loss, sigmoid, FitInfo, Hyperparams, Params};
use crate::linalg::Matrix;
use crate::rng;

/// Gradient-boosted regression trees on the logit scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boosted {
    /// Log-odds of the training class-1 rate.
    pub base: f64,
    pub shrinkage: f64,
    pub trees: Vec<Tree>,
}

impl Boosted {
    pub fn logit(&self, x: &[f64]) -> f64 {
        self.base + self.shrinkage * self.trees.iter().map(|t| t.eval(x)).sum::<f64>()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }
}

/// Each round fits a least-squares tree to the residuals `y - p` and sets
/// every leaf to the Newton step `sum(y - p) / sum(p (1 - p))` over its rows.
pub(super) fn fit(x: &Matrix, y: &[u8], h: &Hyperparams, seed: u64) -> (Params, FitInfo) {
    let rounds = h.n_trees.unwrap_or(100);
    let shrinkage = h.shrinkage.unwrap_or(0.1);
    let subsample = h.subsample.unwrap_or(1.0);
    let p = Grow {
        max_depth: Some(h.max_depth.unwrap_or(3)),
        min_samples_leaf: h.min_samples_leaf.unwrap_or(1),
        mtry: x.cols(),
    };
    let n = x.rows();
    let rate = y.iter().filter(|&&l| l == 1).count() as f64 / n as f64;
    let base = libm::log(rate / (1.0 - rate));
    let mut f = alloc::vec![base; n];
    let mut model = Boosted {
        base,
        shrinkage,
        trees: Vec::with_capacity(rounds),
    };
    let mut g = rng::seeded(seed, 0x6B);
    let take = ((subsample * n as f64) as usize).clamp(1, n);
    let mut trace = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let prob: Vec<f64> = f.iter().map(|&z| sigmoid(z)).collect();
        let resid: Vec<f64> = prob.iter().zip(y).map(|(p, &l)| f64::from(l) - p).collect();
        let hess: Vec<f64> = prob.iter().map(|p| p * (1.0 - p)).collect();
        let mut rows: Vec<usize> = if take < n {
            sample(&mut g, n, take).into_vec()
        } else {
            (0..n).collect()
        };
        rows.sort_unstable();
        let newton = |leaf: &[usize]| {
            let num: f64 = leaf.iter().map(|&i| resid[i]).sum();
            let den: f64 = leaf.iter().map(|&i| hess[i]).sum();
            if den < 1e-150 {
                0.0
            } else {
                num / den
            }
        };
        let t = grow(x, &resid, rows, &p, &mut g, &newton);
        for (fi, r) in f.iter_mut().zip(x.iter_rows()) {
            *fi += shrinkage * t.eval(r);
        }
        model.trees.push(t);
        trace.push(logit_loss(&f, y));
    }
    let info = FitInfo {
        iterations: rounds,
        final_loss: trace.last().copied(),
        loss_trace: trace,
    };
    (Params::Boosted(model), info)
}
