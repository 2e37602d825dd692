use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{sigmoid, FitInfo, Hyperparams, Params};
use crate::linalg::{column_means, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub prior: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl ClassStats {
    fn log_joint(&self, x: &[f64]) -> f64 {
        let mut s = libm::log(self.prior);
        for ((&v, &m), &s2) in x.iter().zip(&self.mean).zip(&self.var) {
            s -= 0.5 * (libm::log(2.0 * core::f64::consts::PI * s2) + (v - m) * (v - m) / s2);
        }
        s
    }
}

/// Gaussian naive Bayes; a class absent from training has no stats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub class0: Option<ClassStats>,
    pub class1: Option<ClassStats>,
}

impl GaussianNb {
    pub fn score(&self, x: &[f64]) -> f64 {
        match (&self.class0, &self.class1) {
            (Some(c0), Some(c1)) => sigmoid(c1.log_joint(x) - c0.log_joint(x)),
            (None, _) => 1.0,
            (_, None) => 0.0,
        }
    }
}

/// Per-class means and population variances. Every variance is padded by
/// `var_smoothing` times the largest overall feature variance.
pub(super) fn fit(x: &Matrix, y: &[u8], h: &Hyperparams) -> (Params, FitInfo) {
    let smoothing = h.var_smoothing.unwrap_or(1e-9);
    let d = x.cols();
    let mu = column_means(x);
    let max_var = (0..d)
        .map(|j| x.iter_rows().map(|r| (r[j] - mu[j]) * (r[j] - mu[j])).sum::<f64>() / x.rows() as f64)
        .fold(0.0, f64::max);
    let eps = (smoothing * max_var).max(1e-12);
    let stats = |class: u8| -> Option<ClassStats> {
        let rows: Vec<&[f64]> = x.iter_rows().zip(y).filter(|(_, &l)| l == class).map(|(r, _)| r).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let var = (0..d)
            .map(|j| rows.iter().map(|r| (r[j] - mean[j]) * (r[j] - mean[j])).sum::<f64>() / n + eps)
            .collect();
        Some(ClassStats {
            prior: n / x.rows() as f64,
            mean,
            var,
        })
    };
    let m = GaussianNb {
        class0: stats(0),
        class1: stats(1),
    };
    (Params::Gnb(m), FitInfo { iterations: 1, ..FitInfo::default() })
}
