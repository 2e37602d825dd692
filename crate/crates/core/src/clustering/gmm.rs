use alloc::vec;
use alloc::vec::Vec;

use super::{kmeans, nearest, ClusterResult, Diagnostics};
use crate::error::Result;
use crate::linalg::Matrix;

const VAR_FLOOR: f64 = 1e-6;
const MAX_ITER: usize = 500;
/// Convergence threshold on the change of the mean per-point log-likelihood.
const TOL: f64 = 1e-6;
const LN_2PI: f64 = 1.837_877_066_409_345_3;

struct Params {
    weights: Vec<f64>,
    means: Matrix,
    vars: Matrix,
}

fn log_density(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((xi, m), v) in x.iter().zip(mean).zip(var) {
        s += (xi - m) * (xi - m) / v + libm::log(*v);
    }
    -0.5 * (s + x.len() as f64 * LN_2PI)
}

/// E-step: responsibilities (row-major n×k) and the total log-likelihood.
fn e_step(points: &Matrix, p: &Params, resp: &mut Matrix) -> f64 {
    let k = p.weights.len();
    let mut ll = 0.0;
    let mut logs = vec![0.0; k];
    for (i, x) in points.iter_rows().enumerate() {
        for (c, l) in logs.iter_mut().enumerate() {
            *l = if p.weights[c] > 0.0 {
                libm::log(p.weights[c]) + log_density(x, p.means.row(c), p.vars.row(c))
            } else {
                f64::NEG_INFINITY
            };
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logs.iter().map(|l| libm::exp(l - max)).sum();
        let lse = max + libm::log(sum);
        ll += lse;
        for c in 0..k {
            resp[(i, c)] = libm::exp(logs[c] - lse);
        }
    }
    ll
}

fn m_step(points: &Matrix, resp: &Matrix, p: &mut Params) {
    let (n, d) = (points.rows(), points.cols());
    let k = p.weights.len();
    for c in 0..k {
        let nk: f64 = (0..n).map(|i| resp[(i, c)]).sum();
        // A component with no mass keeps its parameters and gets zero weight.
        if nk <= 1e-12 {
            p.weights[c] = 0.0;
            continue;
        }
        p.weights[c] = nk / n as f64;
        let mut mean = vec![0.0; d];
        for (i, x) in points.iter_rows().enumerate() {
            let r = resp[(i, c)];
            mean.iter_mut().zip(x).for_each(|(m, xi)| *m += r * xi);
        }
        mean.iter_mut().for_each(|m| *m /= nk);
        let mut var = vec![0.0; d];
        for (i, x) in points.iter_rows().enumerate() {
            let r = resp[(i, c)];
            var.iter_mut()
                .zip(x)
                .zip(&mean)
                .for_each(|((v, xi), m)| *v += r * (xi - m) * (xi - m));
        }
        var.iter_mut().for_each(|v| *v = (*v / nk).max(VAR_FLOOR));
        p.means.row_mut(c).copy_from_slice(&mean);
        p.vars.row_mut(c).copy_from_slice(&var);
    }
}

/// EM for a diagonal-covariance Gaussian mixture, initialized from k-means++
/// seeds with a hard assignment to the nearest seed.
pub(super) fn run(points: &Matrix, k: usize, seed: u64) -> Result<ClusterResult> {
    let (n, d) = (points.rows(), points.cols());
    let seeds = kmeans::plus_plus(points, k, seed);
    let mut resp = Matrix::zeros(n, k);
    for (i, x) in points.iter_rows().enumerate() {
        resp[(i, nearest(x, &seeds).0)] = 1.0;
    }
    let mut params = Params {
        weights: vec![0.0; k],
        means: seeds,
        vars: Matrix::new(k, d, vec![1.0; k * d])?,
    };
    m_step(points, &resp, &mut params);
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let ll = e_step(points, &params, &mut resp);
        let prev = trace.last().copied();
        trace.push(ll);
        if prev.is_some_and(|p: f64| (ll - p).abs() / n as f64 <= TOL) || iterations >= MAX_ITER {
            break;
        }
        m_step(points, &resp, &mut params);
    }
    let assignment = (0..n)
        .map(|i| {
            let mut best = 0;
            for c in 1..k {
                if resp[(i, c)] > resp[(i, best)] {
                    best = c;
                }
            }
            Some(best)
        })
        .collect();
    Ok(ClusterResult {
        assignment,
        n_clusters: k,
        centers: Some(params.means),
        diagnostics: Diagnostics {
            iterations,
            objective: *trace.last().unwrap_or(&0.0),
            trace,
        },
    })
}
