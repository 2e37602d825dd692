//! Principal component analysis for 2-D diagnostic scatter plots.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{column_means, dot, symmetric_eigen, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k x dim`, orthonormal rows, strongest direction first.
    pub components: Matrix,
    /// Variance along each kept component.
    pub variances: Vec<f64>,
    /// Share of the total variance along each kept component.
    pub explained: Vec<f64>,
    /// Sum of all covariance eigenvalues (the covariance trace).
    pub total_variance: f64,
}

/// Sample covariance (divisor `n - 1`) of the rows of `x` about `mean`.
pub fn covariance(x: &Matrix, mean: &[f64]) -> Matrix {
    let d = x.cols();
    let mut c = Matrix::zeros(d, d);
    let mut centred = alloc::vec![0.0; d];
    for r in x.iter_rows() {
        centred.iter_mut().zip(r.iter().zip(mean)).for_each(|(c, (v, m))| *c = v - m);
        for i in 0..d {
            for j in 0..=i {
                c[(i, j)] += centred[i] * centred[j];
            }
        }
    }
    let div = (x.rows() - 1) as f64;
    for i in 0..d {
        for j in 0..=i {
            let v = c[(i, j)] / div;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// Eigendecomposition of the covariance. Each component is signed so its
/// first coordinate with magnitude above `1e-12` is positive.
pub fn pca_fit(x: &Matrix, k: usize) -> Result<PcaModel> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::param("rows", "PCA needs at least two rows"));
    }
    if k == 0 || k > d.min(n - 1) {
        return Err(Error::param("k", alloc::format!("must be in 1..={}", d.min(n - 1))));
    }
    if !x.all_finite() {
        return Err(Error::NonFinite("PCA input"));
    }
    let mean = column_means(x);
    let cov = covariance(x, &mean);
    let (values, vectors) = symmetric_eigen(&cov)?;
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    if total <= 1e-300 {
        return Err(Error::Degenerate("all rows are identical"));
    }
    let mut components = Matrix::zeros(k, d);
    for c in 0..k {
        let v = vectors.row(c);
        let flip = v.iter().find(|x| x.abs() > 1e-12).is_some_and(|&x| x < 0.0);
        for (dst, &src) in components.row_mut(c).iter_mut().zip(v) {
            *dst = if flip { -src } else { src };
        }
    }
    let variances: Vec<f64> = values[..k].iter().map(|v| v.max(0.0)).collect();
    let explained = variances.iter().map(|v| v / total).collect();
    Ok(PcaModel {
        mean,
        components,
        variances,
        explained,
        total_variance: total,
    })
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.components.rows()
    }

    fn project_row(&self, r: &[f64], centred: &mut [f64]) -> Vec<f64> {
        centred.iter_mut().zip(r.iter().zip(&self.mean)).for_each(|(c, (v, m))| *c = v - m);
        self.components.iter_rows().map(|c| dot(c, centred)).collect()
    }

    /// Maps projected coordinates back to the input space.
    pub fn inverse(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                found: z.cols(),
            });
        }
        let mut out = Matrix::zeros(z.rows(), self.dim());
        for (i, zr) in z.iter_rows().enumerate() {
            let row = out.row_mut(i);
            row.copy_from_slice(&self.mean);
            for (c, &w) in self.components.iter_rows().zip(zr) {
                row.iter_mut().zip(c).for_each(|(r, c)| *r += w * c);
            }
        }
        Ok(out)
    }
}

/// `(x - mean) C^T`: one row of `k` coordinates per input row.
pub fn pca_transform(m: &PcaModel, x: &Matrix) -> Result<Matrix> {
    if x.cols() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: x.cols(),
        });
    }
    let mut centred = alloc::vec![0.0; m.dim()];
    let rows: Vec<Vec<f64>> = x.iter_rows().map(|r| m.project_row(r, &mut centred)).collect();
    if rows.is_empty() {
        return Ok(Matrix::empty(m.k()));
    }
    Matrix::from_rows(&rows)
}
