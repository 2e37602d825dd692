//! Negative binomial (NB2) count regression with a log link and Wald
//! inference. Variance is `mu + alpha mu^2`.

use alloc::string::String;
use alloc::vec::Vec;

use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, dot, spd_inverse, Matrix};
use crate::rng;

const LOG_ALPHA_MIN: f64 = -13.815_510_557_964_274; // ln 1e-6
const LOG_ALPHA_MAX: f64 = 6.907_755_278_982_137; // ln 1e3
const ETA_LIMIT: f64 = 700.0;

/// Named covariates and a count response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    pub x: Matrix,
    pub y: Vec<u64>,
}

impl DesignMatrix {
    /// Checks shapes, finiteness and full column rank.
    pub fn new(names: Vec<String>, x: Matrix, y: Vec<u64>) -> Result<Self> {
        if names.len() != x.cols() {
            return Err(Error::DimensionMismatch {
                expected: x.cols(),
                found: names.len(),
            });
        }
        if y.len() != x.rows() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                found: y.len(),
            });
        }
        if x.rows() <= x.cols() {
            return Err(Error::param("rows", "need more observations than columns"));
        }
        if !x.all_finite() {
            return Err(Error::NonFinite("design matrix"));
        }
        if y.iter().all(|&v| v == 0) {
            return Err(Error::Degenerate("every response is zero"));
        }
        cholesky(&x.transpose().matmul(&x)?)?;
        Ok(DesignMatrix { names, x, y })
    }

    /// Appends a constant column named `intercept`.
    pub fn with_intercept(names: Vec<String>, x: &Matrix, y: Vec<u64>) -> Result<Self> {
        let mut names = names;
        names.push("intercept".into());
        let mut data = Vec::with_capacity(x.rows() * (x.cols() + 1));
        for r in x.iter_rows() {
            data.extend_from_slice(r);
            data.push(1.0);
        }
        DesignMatrix::new(names, Matrix::new(x.rows(), x.cols() + 1, data)?, y)
    }
}

/// Response summaries reused by every likelihood evaluation.
struct Counts {
    /// `tail[j]` = number of responses greater than `j`.
    tail: Vec<f64>,
    log_factorials: f64,
    y: Vec<f64>,
}

impl Counts {
    fn new(y: &[u64]) -> Self {
        let max = y.iter().copied().max().unwrap_or(0) as usize;
        let mut hist = alloc::vec![0u64; max + 1];
        y.iter().for_each(|&v| hist[v as usize] += 1);
        let mut tail = alloc::vec![0.0; max];
        let mut above = y.len() as u64;
        for j in 0..max {
            above -= hist[j];
            tail[j] = above as f64;
        }
        Counts {
            tail,
            log_factorials: y.iter().map(|&v| libm::lgamma(v as f64 + 1.0)).sum(),
            y: y.iter().map(|&v| v as f64).collect(),
        }
    }

    /// `sum_i sum_{j < y_i} ln(1 + alpha j)`.
    fn gamma_part(&self, alpha: f64) -> f64 {
        self.tail.iter().enumerate().map(|(j, &c)| c * libm::log1p(alpha * j as f64)).sum()
    }
}

fn linear(x: &Matrix, beta: &[f64]) -> Vec<f64> {
    x.iter_rows().map(|r| dot(r, beta).clamp(-ETA_LIMIT, ETA_LIMIT)).collect()
}

fn loglik_eta(c: &Counts, eta: &[f64], alpha: f64) -> f64 {
    let mut s = c.gamma_part(alpha) - c.log_factorials;
    for (&e, &y) in eta.iter().zip(&c.y) {
        let mu = libm::exp(e);
        s += y * e - (y + 1.0 / alpha) * libm::log1p(alpha * mu);
    }
    s
}

/// Derivative of the log-likelihood with respect to `alpha`.
fn alpha_score(c: &Counts, eta: &[f64], alpha: f64) -> f64 {
    let mut s: f64 = c.tail.iter().enumerate().map(|(j, &n)| n * j as f64 / (1.0 + alpha * j as f64)).sum();
    for (&e, &y) in eta.iter().zip(&c.y) {
        let mu = libm::exp(e);
        s += libm::log1p(alpha * mu) / (alpha * alpha) - (y + 1.0 / alpha) * mu / (1.0 + alpha * mu);
    }
    s
}

/// Maximizes the likelihood over `alpha` at fixed `eta`: golden-section on
/// the log scale, then bisection on the sign of the score, which resolves
/// the optimum well below the flat top of the likelihood itself.
fn best_alpha(c: &Counts, eta: &[f64]) -> f64 {
    let la = golden_max(LOG_ALPHA_MIN, LOG_ALPHA_MAX, 1e-9, |la| loglik_eta(c, eta, libm::exp(la)));
    let (mut lo, mut hi) = ((la - 1e-4).max(LOG_ALPHA_MIN), (la + 1e-4).min(LOG_ALPHA_MAX));
    if !(alpha_score(c, eta, libm::exp(lo)) > 0.0 && alpha_score(c, eta, libm::exp(hi)) < 0.0) {
        return libm::exp(la);
    }
    for _ in 0..200 {
        let mid = (lo + hi) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        if alpha_score(c, eta, libm::exp(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    libm::exp((lo + hi) / 2.0)
}

/// NB2 log-likelihood of `beta, alpha`.
pub fn nb2_loglik(d: &DesignMatrix, beta: &[f64], alpha: f64) -> f64 {
    loglik_eta(&Counts::new(&d.y), &linear(&d.x, beta), alpha)
}

/// Solves `(X^T W X) b = X^T W z`.
fn weighted_ls(x: &Matrix, w: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    let p = x.cols();
    let mut a = Matrix::zeros(p, p);
    let mut rhs = alloc::vec![0.0; p];
    for ((r, &wi), &zi) in x.iter_rows().zip(w).zip(z) {
        for i in 0..p {
            rhs[i] += wi * r[i] * zi;
            for j in 0..=i {
                a[(i, j)] += wi * r[i] * r[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            a[(j, i)] = a[(i, j)];
        }
    }
    Ok(cholesky_solve(&cholesky(&a)?, &rhs))
}

fn start_beta(d: &DesignMatrix, alpha: f64) -> Result<Vec<f64>> {
    let mean = d.y.iter().sum::<u64>() as f64 / d.y.len() as f64;
    let mu: Vec<f64> = d.y.iter().map(|&y| (y as f64 + mean) / 2.0).collect();
    let eta: Vec<f64> = mu.iter().map(|&m| libm::log(m)).collect();
    let w: Vec<f64> = mu.iter().map(|&m| m / (1.0 + alpha * m)).collect();
    weighted_ls(&d.x, &w, &eta)
}

/// Fisher scoring for `beta` at fixed `alpha`, halving any step that lowers
/// the likelihood. Returns the log-likelihood and the number of steps.
fn irls(d: &DesignMatrix, c: &Counts, alpha: f64, beta: &mut Vec<f64>, tol: f64, max_iter: usize) -> Result<(f64, usize)> {
    let mut eta = linear(&d.x, beta);
    let mut ll = loglik_eta(c, &eta, alpha);
    for it in 1..=max_iter {
        let mu: Vec<f64> = eta.iter().map(|&e| libm::exp(e)).collect();
        let w: Vec<f64> = mu.iter().map(|&m| m / (1.0 + alpha * m)).collect();
        let z: Vec<f64> = eta.iter().zip(&mu).zip(&c.y).map(|((e, m), y)| e + (y - m) / m).collect();
        let target = weighted_ls(&d.x, &w, &z)?;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = beta.iter().zip(&target).map(|(b, t)| b + step * (t - b)).collect();
            let e = linear(&d.x, &cand);
            let l = loglik_eta(c, &e, alpha);
            if l >= ll {
                accepted = Some((cand, e, l));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, e, l)) = accepted else {
            return Ok((ll, it));
        };
        let delta = cand.iter().zip(beta.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        (*beta, eta, ll) = (cand, e, l);
        if delta < tol {
            return Ok((ll, it));
        }
    }
    Ok((ll, max_iter))
}

/// Maximizes `f` over `[lo, hi]` by golden-section search, assuming a single
/// interior maximum (or a monotone trend toward an end).
fn golden_max(lo: f64, hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    let r = (libm::sqrt(5.0) - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            (d, fd) = (c, fc);
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            (c, fc) = (d, fd);
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mut best = (a + b) / 2.0;
    let mut fbest = f(best);
    for cand in [lo, hi] {
        let v = f(cand);
        if v > fbest {
            (best, fbest) = (cand, v);
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iter: 100, tol: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub coef: f64,
    pub std_err: f64,
    pub z: f64,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub coefficients: Vec<Coefficient>,
    pub alpha: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after each outer iteration, starting value first.
    pub ll_trace: Vec<f64>,
}

impl RegressionResult {
    pub fn beta(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.coef).collect()
    }
}

/// Best log-likelihood over `beta` with `alpha` held fixed.
pub fn profile_loglik(d: &DesignMatrix, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", "must be positive"));
    }
    let c = Counts::new(&d.y);
    let mut beta = start_beta(d, alpha)?;
    Ok(irls(d, &c, alpha, &mut beta, 1e-12, 500)?.0)
}

/// Two-sided normal tail probability of `|z|`.
pub fn wald_p(z: f64) -> f64 {
    libm::erfc(z.abs() / core::f64::consts::SQRT_2)
}

/// Alternates Fisher scoring for `beta` (fixed `alpha`) with golden-section
/// search for `alpha` on the log scale over `[1e-6, 1e3]` (fixed `beta`).
/// Each half-step can only raise the likelihood. Standard errors come from
/// the observed information of `beta` at the fitted `alpha`.
pub fn fit_nb2(d: &DesignMatrix, opts: FitOptions) -> Result<RegressionResult> {
    if opts.max_iter == 0 || opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::param("fit options", "max_iter >= 1 and tol > 0 required"));
    }
    let c = Counts::new(&d.y);
    let mut alpha: f64 = 0.1;
    let mut beta = start_beta(d, alpha)?;
    let (mut ll, _) = irls(d, &c, alpha, &mut beta, opts.tol, opts.max_iter)?;
    let mut trace = alloc::vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let eta = linear(&d.x, &beta);
        let cand = best_alpha(&c, &eta);
        // Tolerates rounding-level dips near the optimum.
        let new_alpha = if loglik_eta(&c, &eta, cand) >= ll - 1e-10 { cand } else { alpha };
        let old_beta = beta.clone();
        let (new_ll, _) = irls(d, &c, new_alpha, &mut beta, opts.tol, opts.max_iter)?;
        let d_beta = beta.iter().zip(&old_beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let d_alpha = (new_alpha - alpha).abs() / alpha;
        alpha = new_alpha;
        ll = new_ll;
        trace.push(ll);
        if d_beta < opts.tol && d_alpha < opts.tol {
            converged = true;
            break;
        }
    }
    let eta = linear(&d.x, &beta);
    let w: Vec<f64> = eta
        .iter()
        .zip(&c.y)
        .map(|(&e, &y)| {
            let mu = libm::exp(e);
            mu * (1.0 + alpha * y) / ((1.0 + alpha * mu) * (1.0 + alpha * mu))
        })
        .collect();
    let p = d.x.cols();
    let mut info = Matrix::zeros(p, p);
    for (r, &wi) in d.x.iter_rows().zip(&w) {
        for i in 0..p {
            for j in 0..p {
                info[(i, j)] += wi * r[i] * r[j];
            }
        }
    }
    let cov = spd_inverse(&info)?;
    let coefficients = d
        .names
        .iter()
        .zip(&beta)
        .enumerate()
        .map(|(i, (name, &coef))| {
            let std_err = libm::sqrt(cov[(i, i)]);
            let z = coef / std_err;
            Coefficient {
                name: name.clone(),
                coef,
                std_err,
                z,
                p: wald_p(z),
            }
        })
        .collect();
    Ok(RegressionResult {
        coefficients,
        alpha,
        log_likelihood: ll,
        iterations,
        converged,
        ll_trace: trace,
    })
}

/// Significance marks: `*` for p <= 0.1, `**` for p <= 0.05, `***` for p <= 0.01.
pub fn stars(p: f64) -> &'static str {
    if p <= 0.01 {
        "***"
    } else if p <= 0.05 {
        "**"
    } else if p <= 0.1 {
        "*"
    } else {
        ""
    }
}

/// Draws NB2 counts for the rows of `x` as a gamma-Poisson mixture.
pub fn simulate_nb2(x: &Matrix, beta: &[f64], alpha: f64, seed: u64) -> Result<Vec<u64>> {
    if beta.len() != x.cols() {
        return Err(Error::DimensionMismatch {
            expected: x.cols(),
            found: beta.len(),
        });
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", "must be positive"));
    }
    let mut g = rng::seeded(seed, 0x4E42);
    x.iter_rows()
        .map(|r| {
            let mu = libm::exp(dot(r, beta));
            let gamma = Gamma::new(1.0 / alpha, alpha * mu).map_err(|_| Error::param("mu", "invalid gamma parameters"))?;
            let lambda = gamma.sample(&mut g);
            if lambda <= 0.0 {
                return Ok(0);
            }
            let p = Poisson::new(lambda).map_err(|_| Error::param("mu", "invalid Poisson rate"))?;
            Ok(p.sample(&mut g) as u64)
        })
        .collect()
}
