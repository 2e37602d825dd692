//! Five clustering algorithms behind one contract: k-means, diagonal
//! Gaussian mixture, DBSCAN, naive agglomerative and Birch. All use the
//! Euclidean metric and are deterministic for a fixed seed.

mod agglomerative;
mod birch;
mod dbscan;
mod gmm;
mod kmeans;

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use agglomerative::agglomerate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Single,
    Average,
    Complete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ClusterMethod {
    Kmeans {
        k: usize,
    },
    GmmDiag {
        k: usize,
    },
    Dbscan {
        eps: f64,
        min_pts: usize,
    },
    Agglomerative {
        k: usize,
        linkage: Linkage,
    },
    Birch {
        k: usize,
        /// Maximum subcluster radius.
        threshold: f64,
        /// Maximum entries per tree node.
        branching: usize,
        #[serde(default = "default_birch_linkage")]
        linkage: Linkage,
    },
}

fn default_birch_linkage() -> Linkage {
    Linkage::Average
}

impl ClusterMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ClusterMethod::Kmeans { .. } => "kmeans",
            ClusterMethod::GmmDiag { .. } => "gmm",
            ClusterMethod::Dbscan { .. } => "dbscan",
            ClusterMethod::Agglomerative { .. } => "agglomerative",
            ClusterMethod::Birch { .. } => "birch",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k_ok = |k: usize| {
            if k == 0 {
                Err(Error::param("k", "must be at least 1"))
            } else {
                Ok(())
            }
        };
        match *self {
            ClusterMethod::Kmeans { k }
            | ClusterMethod::GmmDiag { k }
            | ClusterMethod::Agglomerative { k, .. } => k_ok(k),
            ClusterMethod::Dbscan { eps, min_pts } => {
                if !(eps > 0.0 && eps.is_finite()) {
                    return Err(Error::param("eps", "must be positive"));
                }
                if min_pts == 0 {
                    return Err(Error::param("min_pts", "must be at least 1"));
                }
                Ok(())
            }
            ClusterMethod::Birch {
                k,
                threshold,
                branching,
                ..
            } => {
                k_ok(k)?;
                if !(threshold > 0.0 && threshold.is_finite()) {
                    return Err(Error::param("threshold", "must be positive"));
                }
                if branching < 2 {
                    return Err(Error::param("branching", "must be at least 2"));
                }
                Ok(())
            }
        }
    }

    fn k(&self) -> Option<usize> {
        match *self {
            ClusterMethod::Kmeans { k }
            | ClusterMethod::GmmDiag { k }
            | ClusterMethod::Agglomerative { k, .. }
            | ClusterMethod::Birch { k, .. } => Some(k),
            ClusterMethod::Dbscan { .. } => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    /// Inertia (k-means, Birch, agglomerative), log-likelihood (GMM) or the
    /// number of noise points (DBSCAN).
    pub objective: f64,
    /// Objective after every iteration, for the iterative methods.
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// Cluster of every input point; `None` marks DBSCAN noise.
    pub assignment: Vec<Option<usize>>,
    pub n_clusters: usize,
    pub centers: Option<Matrix>,
    pub diagnostics: Diagnostics,
}

impl ClusterResult {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = alloc::vec![0; self.n_clusters];
        for c in self.assignment.iter().flatten() {
            s[*c] += 1;
        }
        s
    }
}

pub(crate) fn inertia(points: &Matrix, centers: &Matrix, assignment: &[Option<usize>]) -> f64 {
    points
        .iter_rows()
        .zip(assignment)
        .filter_map(|(p, a)| a.map(|c| crate::linalg::sq_dist(p, centers.row(c))))
        .sum()
}

pub(crate) fn nearest(p: &[f64], centers: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter_rows().enumerate() {
        let d = crate::linalg::sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

pub(crate) fn means_of(points: &Matrix, assignment: &[Option<usize>], k: usize) -> Matrix {
    let mut centers = Matrix::zeros(k, points.cols());
    let mut counts = alloc::vec![0usize; k];
    for (p, a) in points.iter_rows().zip(assignment) {
        if let Some(c) = *a {
            counts[c] += 1;
            for (acc, x) in centers.row_mut(c).iter_mut().zip(p) {
                *acc += x;
            }
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            centers.row_mut(c).iter_mut().for_each(|x| *x /= n as f64);
        }
    }
    centers
}

fn all_identical(points: &Matrix) -> bool {
    let first = points.row(0);
    points.iter_rows().all(|r| r == first)
}

/// Clusters the rows of `points`.
pub fn cluster(points: &Matrix, method: &ClusterMethod, seed: u64) -> Result<ClusterResult> {
    method.validate()?;
    if points.is_empty() {
        return Err(Error::Empty("points to cluster"));
    }
    if !points.all_finite() {
        return Err(Error::NonFinite("points to cluster"));
    }
    if let Some(k) = method.k() {
        if k > points.rows() {
            return Err(Error::param(
                "k",
                format!("{k} clusters requested for {} points", points.rows()),
            ));
        }
        if k > 1 && all_identical(points) {
            return Err(Error::DegenerateClustering(format!(
                "all {} points are identical but k = {k}",
                points.rows()
            )));
        }
    }
    match *method {
        ClusterMethod::Kmeans { k } => kmeans::run(points, k, seed),
        ClusterMethod::GmmDiag { k } => gmm::run(points, k, seed),
        ClusterMethod::Dbscan { eps, min_pts } => Ok(dbscan::run(points, eps, min_pts)),
        ClusterMethod::Agglomerative { k, linkage } => {
            let assignment = agglomerate(points, k, linkage)?;
            let assignment: Vec<Option<usize>> = assignment.into_iter().map(Some).collect();
            let centers = means_of(points, &assignment, k);
            let obj = inertia(points, &centers, &assignment);
            Ok(ClusterResult {
                assignment,
                n_clusters: k,
                centers: Some(centers),
                diagnostics: Diagnostics {
                    iterations: points.rows() - k,
                    objective: obj,
                    trace: Vec::new(),
                },
            })
        }
        ClusterMethod::Birch {
            k,
            threshold,
            branching,
            linkage,
        } => birch::run(points, k, threshold, branching, linkage),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn validation() {
        assert!(ClusterMethod::Kmeans { k: 0 }.validate().is_err());
        assert!(ClusterMethod::Dbscan { eps: 0.0, min_pts: 1 }.validate().is_err());
        assert!(ClusterMethod::Dbscan { eps: 1.0, min_pts: 0 }.validate().is_err());
        let b = ClusterMethod::Birch { k: 2, threshold: 1.0, branching: 1, linkage: Linkage::Average };
        assert!(b.validate().is_err());
    }

    #[test]
    fn k_larger_than_n_and_identical_points() {
        let pts = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(cluster(&pts, &ClusterMethod::Kmeans { k: 3 }, 0).is_err());
        assert!(matches!(
            cluster(&pts, &ClusterMethod::GmmDiag { k: 2 }, 0),
            Err(Error::DegenerateClustering(_))
        ));
        let one = cluster(&pts, &ClusterMethod::Kmeans { k: 1 }, 0).unwrap();
        assert_eq!(one.assignment, vec![Some(0), Some(0)]);
    }

    #[test]
    fn single_point_single_cluster() {
        let pts = Matrix::from_rows(&[[2.5, -1.0]]).unwrap();
        for m in [
            ClusterMethod::Kmeans { k: 1 },
            ClusterMethod::GmmDiag { k: 1 },
            ClusterMethod::Agglomerative { k: 1, linkage: Linkage::Single },
            ClusterMethod::Birch { k: 1, threshold: 0.5, branching: 4, linkage: Linkage::Average },
        ] {
            let r = cluster(&pts, &m, 3).unwrap();
            assert_eq!(r.assignment, vec![Some(0)]);
            assert_eq!(r.centers.unwrap().row(0), &[2.5, -1.0]);
        }
    }
}
