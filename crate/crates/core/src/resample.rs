//! Class-imbalance handling: SMOTE oversampling and Tomek-link cleaning.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Matrix};
use crate::rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    None,
    Smote,
    Tomek,
    SmoteTomek,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResampleConfig {
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
    /// Minority-to-majority ratio SMOTE oversamples up to.
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    /// Repeat Tomek cleaning until no link remains.
    #[serde(default)]
    pub tomek_fixpoint: bool,
}

fn default_k() -> usize {
    5
}

fn default_ratio() -> f64 {
    1.0
}

impl Default for ResampleConfig {
    fn default() -> Self {
        ResampleConfig {
            strategy: Strategy::None,
            k_neighbors: default_k(),
            ratio: default_ratio(),
            tomek_fixpoint: false,
        }
    }
}

impl ResampleConfig {
    pub fn with_strategy(strategy: Strategy) -> Self {
        ResampleConfig {
            strategy,
            ..ResampleConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::param("k_neighbors", "must be at least 1"));
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::param("ratio", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// What resampling did to a training set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResampleReport {
    pub synthesized: usize,
    pub removed: usize,
}

fn check(x: &Matrix, y: &[u8]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            found: y.len(),
        });
    }
    if !x.all_finite() {
        return Err(Error::NonFinite("resample input"));
    }
    Ok(())
}

/// Majority label; label 0 on a tie.
fn majority(y: &[u8]) -> u8 {
    let ones = y.iter().filter(|&&l| l == 1).count();
    u8::from(ones > y.len() - ones)
}

/// Indices of the `k` nearest rows of `pool` to `pool[i]`, excluding `i`
/// (ties broken by lower index).
fn k_nearest(x: &Matrix, pool: &[usize], i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = pool
        .iter()
        .filter(|&&j| j != i)
        .map(|&j| (sq_dist(x.row(i), x.row(j)), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.into_iter().map(|(_, j)| j).collect()
}

/// Appends synthetic minority rows `x + u (x_nn - x)` until the minority
/// count reaches `ceil(ratio * majority)`. Base rows cycle through the
/// minority in order; `x_nn` is one of the base row's `k` nearest minority
/// neighbours and `u ~ U[0, 1]`, both drawn from a per-row substream.
pub fn smote(x: &Matrix, y: &[u8], cfg: &ResampleConfig, seed: u64) -> Result<(Matrix, Vec<u8>)> {
    cfg.validate()?;
    check(x, y)?;
    let maj = majority(y);
    let minority: Vec<usize> = (0..y.len()).filter(|&i| y[i] != maj).collect();
    let n_maj = y.len() - minority.len();
    let target = libm::ceil(cfg.ratio * n_maj as f64 - 1e-9) as usize;
    let mut out_x = x.clone();
    let mut out_y = y.to_vec();
    if minority.len() >= target {
        return Ok((out_x, out_y));
    }
    if minority.len() < 2 {
        return Err(Error::param("smote", "the minority class needs at least two rows"));
    }
    if cfg.k_neighbors >= minority.len() {
        return Err(Error::param(
            "k_neighbors",
            alloc::format!("must be below the minority size {}", minority.len()),
        ));
    }
    let neighbours: Vec<Vec<usize>> = minority
        .iter()
        .map(|&i| k_nearest(x, &minority, i, cfg.k_neighbors))
        .collect();
    let minority_label = 1 - maj;
    let mut row = alloc::vec![0.0; x.cols()];
    for s in 0..target - minority.len() {
        let mut g = rng::seeded(seed, 0x5307_0000_0000 + s as u64);
        let b = s % minority.len();
        let nn = neighbours[b][g.random_range(0..cfg.k_neighbors)];
        let u: f64 = g.random_range(0.0..=1.0);
        let (base, other) = (x.row(minority[b]), x.row(nn));
        for ((r, a), c) in row.iter_mut().zip(base).zip(other) {
            *r = a + u * (c - a);
        }
        out_x.push_row(&row)?;
        out_y.push(minority_label);
    }
    Ok((out_x, out_y))
}

/// Index pairs `(i, j)`, `i < j`, of opposite-class mutual nearest
/// neighbours.
pub fn tomek_links(x: &Matrix, y: &[u8]) -> Vec<(usize, usize)> {
    let n = x.rows();
    let all: Vec<usize> = (0..n).collect();
    let nn: Vec<Option<usize>> = (0..n).map(|i| k_nearest(x, &all, i, 1).first().copied()).collect();
    (0..n)
        .filter_map(|i| {
            let j = nn[i]?;
            (i < j && nn[j] == Some(i) && y[i] != y[j]).then_some((i, j))
        })
        .collect()
}

/// Drops the majority member of every Tomek link (one pass). The minority
/// class is never touched.
pub fn tomek_remove(x: &Matrix, y: &[u8]) -> Result<(Matrix, Vec<u8>)> {
    check(x, y)?;
    Ok(remove_links(x, y, majority(y)))
}

fn remove_links(x: &Matrix, y: &[u8], maj: u8) -> (Matrix, Vec<u8>) {
    let mut drop = alloc::vec![false; y.len()];
    for (i, j) in tomek_links(x, y) {
        drop[if y[i] == maj { i } else { j }] = true;
    }
    let keep: Vec<usize> = (0..y.len()).filter(|&i| !drop[i]).collect();
    (x.select_rows(&keep), keep.iter().map(|&i| y[i]).collect())
}

/// Repeats [`tomek_remove`] until no link remains, keeping the class roles
/// of the input. Each pass removes at least one majority row, so it stops
/// after at most that many passes.
pub fn tomek_remove_fixpoint(x: &Matrix, y: &[u8]) -> Result<(Matrix, Vec<u8>, usize)> {
    check(x, y)?;
    let maj = majority(y);
    let (mut x, mut y) = (x.clone(), y.to_vec());
    let mut passes = 0;
    loop {
        let (nx, ny) = remove_links(&x, &y, maj);
        if ny.len() == y.len() {
            return Ok((x, y, passes));
        }
        passes += 1;
        (x, y) = (nx, ny);
    }
}

/// Applies the configured strategy.
pub fn apply(cfg: &ResampleConfig, x: &Matrix, y: &[u8], seed: u64) -> Result<(Matrix, Vec<u8>, ResampleReport)> {
    cfg.validate()?;
    let n0 = y.len();
    let (mut x, mut y) = (x.clone(), y.to_vec());
    let mut report = ResampleReport::default();
    if matches!(cfg.strategy, Strategy::Smote | Strategy::SmoteTomek) {
        (x, y) = smote(&x, &y, cfg, seed)?;
        report.synthesized = y.len() - n0;
    }
    if matches!(cfg.strategy, Strategy::Tomek | Strategy::SmoteTomek) {
        let before = y.len();
        (x, y) = if cfg.tomek_fixpoint {
            let (x, y, _) = tomek_remove_fixpoint(&x, &y)?;
            (x, y)
        } else {
            tomek_remove(&x, &y)?
        };
        report.removed = before - y.len();
    }
    Ok((x, y, report))
}
