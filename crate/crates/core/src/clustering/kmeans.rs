use alloc::vec::Vec;

use rand::Rng;

use super::{inertia, means_of, nearest, ClusterResult, Diagnostics};
use crate::error::Result;
use crate::linalg::{sq_dist, Matrix};
use crate::rng;

const MAX_ITER: usize = 300;
const REL_TOL: f64 = 1e-6;

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance to the nearest chosen center.
pub(super) fn plus_plus(points: &Matrix, k: usize, seed: u64) -> Matrix {
    let n = points.rows();
    let mut g = rng::seeded(seed, 0xC1);
    let mut chosen = Vec::with_capacity(k);
    chosen.push(g.random_range(0..n));
    let mut d2: Vec<f64> = points
        .iter_rows()
        .map(|p| sq_dist(p, points.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = g.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            // Round-off can leave `pick` on a zero-weight point.
            if d2[pick] <= 0.0 {
                pick = d2.iter().rposition(|&d| d > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            // Fewer distinct points than clusters.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, p) in points.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, points.row(next)));
        }
    }
    points.select_rows(&chosen)
}

pub(super) fn run(points: &Matrix, k: usize, seed: u64) -> Result<ClusterResult> {
    let mut centers = plus_plus(points, k, seed);
    let mut trace = Vec::new();
    let mut assignment: Vec<Option<usize>>;
    let mut iterations = 0;
    loop {
        iterations += 1;
        assignment = points
            .iter_rows()
            .map(|p| Some(nearest(p, &centers).0))
            .collect();
        let obj = inertia(points, &centers, &assignment);
        let prev = trace.last().copied();
        trace.push(obj);
        let converged = prev.is_some_and(|p: f64| (p - obj).abs() <= REL_TOL * p.max(f64::MIN_POSITIVE));
        if converged || iterations >= MAX_ITER || obj == 0.0 {
            break;
        }
        let updated = means_of(points, &assignment, k);
        let sizes = {
            let mut s = alloc::vec![0usize; k];
            assignment.iter().flatten().for_each(|&c| s[c] += 1);
            s
        };
        // An emptied cluster keeps its previous center.
        for (c, &size) in sizes.iter().enumerate() {
            if size > 0 {
                centers.row_mut(c).copy_from_slice(updated.row(c));
            }
        }
    }
    let objective = *trace.last().unwrap_or(&0.0);
    Ok(ClusterResult {
        assignment,
        n_clusters: k,
        centers: Some(centers),
        diagnostics: Diagnostics {
            iterations,
            objective,
            trace,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::super::{cluster, ClusterMethod};
    use super::*;
    use alloc::vec;

    fn blobs(seed: u64, n_each: usize) -> (Matrix, Vec<usize>) {
        let mut g = rng::seeded(seed, 1);
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (c, center) in [[0.0, 0.0], [20.0, 5.0]].iter().enumerate() {
            for _ in 0..n_each {
                rows.push(vec![center[0] + rng::normal(&mut g), center[1] + rng::normal(&mut g)]);
                truth.push(c);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), truth)
    }

    /// Exhaustive optimal 2-means: every bipartition, scored by SSE.
    fn brute_force_two_means(points: &Matrix) -> (f64, Vec<usize>) {
        let n = points.rows();
        let mut best = (f64::INFINITY, Vec::new());
        for mask in 1u32..(1 << (n - 1)) {
            let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
            let mut sse = 0.0;
            for c in 0..2 {
                let members: Vec<&[f64]> = (0..n).filter(|&i| labels[i] == c).map(|i| points.row(i)).collect();
                let d = points.cols();
                let mean: Vec<f64> = (0..d)
                    .map(|j| members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64)
                    .collect();
                sse += members.iter().map(|m| sq_dist(m, &mean)).sum::<f64>();
            }
            if sse < best.0 {
                best = (sse, labels);
            }
        }
        best
    }

    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
    }

    #[test]
    fn recovers_blobs_and_matches_exhaustive_optimum() {
        for seed in 0..5 {
            let (pts, truth) = blobs(seed, 6);
            let r = cluster(&pts, &ClusterMethod::Kmeans { k: 2 }, seed).unwrap();
            let got: Vec<usize> = r.assignment.iter().map(|a| a.unwrap()).collect();
            let (sse, opt) = brute_force_two_means(&pts);
            assert!(same_partition(&got, &truth));
            assert!(same_partition(&opt, &truth));
            assert!((r.diagnostics.objective - sse).abs() < 1e-9 * sse.max(1.0));
        }
    }

    #[test]
    fn inertia_never_increases() {
        let mut g = rng::seeded(42, 0);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..3).map(|_| rng::normal(&mut g) * 3.0).collect())
            .collect();
        let pts = Matrix::from_rows(&rows).unwrap();
        for k in [2, 5, 9] {
            let r = cluster(&pts, &ClusterMethod::Kmeans { k }, 7).unwrap();
            assert!(r.diagnostics.trace.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0]));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (pts, _) = blobs(3, 20);
        let a = cluster(&pts, &ClusterMethod::Kmeans { k: 3 }, 11).unwrap();
        let b = cluster(&pts, &ClusterMethod::Kmeans { k: 3 }, 11).unwrap();
        assert_eq!(a, b);
    }
}
