use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::{means_of, ClusterResult, Diagnostics};
use crate::linalg::{sq_dist, Matrix};

fn neighbors(points: &Matrix, i: usize, eps2: f64) -> Vec<usize> {
    let p = points.row(i);
    (0..points.rows())
        .filter(|&j| sq_dist(p, points.row(j)) <= eps2)
        .collect()
}

/// Density clustering. A point is core when its closed `eps`-ball holds at
/// least `min_pts` points (itself included); clusters grow from cores in
/// index order and border points join the first cluster that reaches them.
pub(super) fn run(points: &Matrix, eps: f64, min_pts: usize) -> ClusterResult {
    let n = points.rows();
    let eps2 = eps * eps;
    let mut assignment: Vec<Option<usize>> = alloc::vec![None; n];
    let mut visited = alloc::vec![false; n];
    let mut n_clusters = 0;
    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let nb = neighbors(points, i, eps2);
        if nb.len() < min_pts {
            continue;
        }
        let c = n_clusters;
        n_clusters += 1;
        assignment[i] = Some(c);
        let mut queue: VecDeque<usize> = nb.into_iter().collect();
        while let Some(j) = queue.pop_front() {
            if assignment[j].is_none() {
                assignment[j] = Some(c);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let nb = neighbors(points, j, eps2);
            if nb.len() >= min_pts {
                queue.extend(nb);
            }
        }
    }
    let noise = assignment.iter().filter(|a| a.is_none()).count();
    let centers = (n_clusters > 0).then(|| means_of(points, &assignment, n_clusters));
    ClusterResult {
        assignment,
        n_clusters,
        centers,
        diagnostics: Diagnostics {
            iterations: 1,
            objective: noise as f64,
            trace: Vec::new(),
        },
    }
}
