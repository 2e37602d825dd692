//! Word vectors, averaged document embeddings, cosine similarity and
//! column standardization.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Token to vector lexicon with a fixed dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct WordEmbeddings {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl WordEmbeddings {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "word vectors need at least one component"));
        }
        Ok(WordEmbeddings {
            dim,
            vectors: BTreeMap::new(),
        })
    }

    /// Inserts a vector; returns `true` when it replaced an existing token.
    pub fn insert(&mut self, token: impl Into<String>, v: Vec<f64>) -> Result<bool> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("word vector"));
        }
        Ok(self.vectors.insert(token.into(), v).is_some())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }
}

/// Mean of the vectors of in-lexicon tokens; `None` if no token is known.
pub fn doc_embedding<S: AsRef<str>>(tokens: &[S], we: &WordEmbeddings) -> Option<Vec<f64>> {
    let mut sum = alloc::vec![0.0; we.dim()];
    let mut n = 0usize;
    for t in tokens {
        if let Some(v) = we.get(t.as_ref()) {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    sum.iter_mut().for_each(|s| *s /= n as f64);
    Some(sum)
}

/// Cosine similarity `a·b / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let na = linalg::norm(a);
    let nb = linalg::norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((linalg::dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Per-column z-score parameters fitted on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    /// Population standard deviation; zero marks a constant column, which is
    /// only centered.
    pub std: Vec<f64>,
}

pub fn standardize_fit(train: &Matrix) -> Result<Scaler> {
    if train.is_empty() {
        return Err(Error::Empty("standardize_fit matrix"));
    }
    let mean = linalg::column_means(train);
    let mut var = alloc::vec![0.0; train.cols()];
    for r in train.iter_rows() {
        for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let n = train.rows() as f64;
    let std = var
        .into_iter()
        .map(|v| {
            let s = libm::sqrt(v / n);
            // Treat round-off level spread as constant.
            if s <= 1e-12 {
                0.0
            } else {
                s
            }
        })
        .collect();
    Ok(Scaler { mean, std })
}

pub fn standardize_apply(scaler: &Scaler, m: &Matrix) -> Result<Matrix> {
    if m.cols() != scaler.mean.len() {
        return Err(Error::DimensionMismatch {
            expected: scaler.mean.len(),
            found: m.cols(),
        });
    }
    let mut out = m.clone();
    for i in 0..out.rows() {
        scaler.apply_row(out.row_mut(i));
    }
    Ok(out)
}

impl Scaler {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *x -= m;
            if *s > 0.0 {
                *x /= s;
            }
        }
    }
}
