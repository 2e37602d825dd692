use alloc::vec::Vec;

use super::Linkage;
use crate::error::{Error, Result};
use crate::linalg::{dist, Matrix};

/// Bottom-up clustering: repeatedly merges the closest pair of active
/// clusters (Lance-Williams distance updates) until `k` remain. Ties go to
/// the lexicographically first pair `(i, j)`, `i < j`.
///
/// Quadratic memory. Each row caches its nearest active partner to the
/// right, so a merge only rescans rows whose cached partner changed.
/// Labels are numbered by each cluster's smallest member index.
pub fn agglomerate(points: &Matrix, k: usize, linkage: Linkage) -> Result<Vec<usize>> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::param("k", "must be in 1..=n"));
    }
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = dist(points.row(i), points.row(j));
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    let mut size = alloc::vec![1usize; n];
    let mut active = alloc::vec![true; n];
    // Union-find style parent pointer; merged clusters point at their survivor.
    let mut parent: Vec<usize> = (0..n).collect();
    let scan = |d: &Matrix, active: &[bool], i: usize| {
        let mut best = (usize::MAX, f64::INFINITY);
        for j in i + 1..n {
            if active[j] && d[(i, j)] < best.1 {
                best = (j, d[(i, j)]);
            }
        }
        best
    };
    let mut nn: Vec<(usize, f64)> = (0..n).map(|i| scan(&d, &active, i)).collect();
    for _ in 0..n - k {
        let mut a = usize::MAX;
        for i in 0..n {
            if active[i] && nn[i].0 != usize::MAX && (a == usize::MAX || nn[i].1 < nn[a].1) {
                a = i;
            }
        }
        let b = nn[a].0;
        for m in 0..n {
            if !active[m] || m == a || m == b {
                continue;
            }
            let (da, db) = (d[(a, m)], d[(b, m)]);
            let v = match linkage {
                Linkage::Single => da.min(db),
                Linkage::Complete => da.max(db),
                Linkage::Average => {
                    (size[a] as f64 * da + size[b] as f64 * db) / (size[a] + size[b]) as f64
                }
            };
            d[(a, m)] = v;
            d[(m, a)] = v;
        }
        size[a] += size[b];
        active[b] = false;
        parent[b] = a;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            if i == a || nn[i].0 == a || nn[i].0 == b {
                nn[i] = scan(&d, &active, i);
            } else if i < a {
                let v = d[(i, a)];
                if v < nn[i].1 || (v == nn[i].1 && a < nn[i].0) {
                    nn[i] = (a, v);
                }
            }
        }
    }
    let root = |mut i: usize| {
        while parent[i] != i {
            i = parent[i];
        }
        i
    };
    let mut label_of_root = alloc::vec![usize::MAX; n];
    let mut next = 0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let r = root(i);
        if label_of_root[r] == usize::MAX {
            label_of_root[r] = next;
            next += 1;
        }
        out.push(label_of_root[r]);
    }
    Ok(out)
}
