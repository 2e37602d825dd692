use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{FitInfo, Hyperparams, Params};
use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Matrix};

/// Stored training rows; the score is the fraction of class-1 labels among
/// the `k` nearest rows (Euclidean, ties broken by lower row index).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbors {
    pub k: usize,
    pub x: Matrix,
    pub y: Vec<u8>,
}

impl Neighbors {
    pub fn score(&self, q: &[f64]) -> f64 {
        let mut d: Vec<(f64, usize)> = self.x.iter_rows().enumerate().map(|(i, r)| (sq_dist(q, r), i)).collect();
        let k = self.k;
        let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, by);
        }
        let ones = d[..k].iter().filter(|(_, i)| self.y[*i] == 1).count();
        ones as f64 / k as f64
    }
}

pub(super) fn fit(x: &Matrix, y: &[u8], h: &Hyperparams) -> Result<(Params, FitInfo)> {
    let k = h.k_neighbors.unwrap_or(5);
    if k > x.rows() {
        return Err(Error::param("k_neighbors", alloc::format!("{k} exceeds the {} training rows", x.rows())));
    }
    let m = Neighbors {
        k,
        x: x.clone(),
        y: y.to_vec(),
    };
    Ok((Params::Knn(m), FitInfo::default()))
}
