//! Birch: a clustering-feature tree condenses the points into subclusters of
//! bounded radius, then the subcluster centroids are merged to `k` clusters
//! with [`agglomerate`](super::agglomerate).

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use super::{agglomerate, inertia, means_of, nearest, ClusterResult, Diagnostics, Linkage};
use crate::error::{Error, Result};
use crate::linalg::{dot, sq_dist, Matrix};

/// Clustering feature: count, linear sum and sum of squared norms.
#[derive(Clone, Debug)]
struct Cf {
    n: f64,
    ls: Vec<f64>,
    ss: f64,
}

impl Cf {
    fn point(x: &[f64]) -> Self {
        Cf {
            n: 1.0,
            ls: x.to_vec(),
            ss: dot(x, x),
        }
    }

    fn add(&mut self, o: &Cf) {
        self.n += o.n;
        self.ls.iter_mut().zip(&o.ls).for_each(|(a, b)| *a += b);
        self.ss += o.ss;
    }

    fn centroid(&self) -> Vec<f64> {
        self.ls.iter().map(|x| x / self.n).collect()
    }

    /// Root-mean-square distance of members to the centroid.
    fn radius(&self) -> f64 {
        let c = self.centroid();
        libm::sqrt((self.ss / self.n - dot(&c, &c)).max(0.0))
    }
}

struct Entry {
    cf: Cf,
    child: Option<Box<Node>>,
}

struct Node {
    leaf: bool,
    entries: Vec<Entry>,
}

fn closest(entries: &[Entry], x: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, e) in entries.iter().enumerate() {
        let d = sq_dist(&e.cf.centroid(), x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

fn summarize(node: &Node) -> Cf {
    let mut it = node.entries.iter();
    let mut cf = it.next().expect("nodes are never empty").cf.clone();
    for e in it {
        cf.add(&e.cf);
    }
    cf
}

/// Splits an overfull node around its two most distant entries.
fn split(node: Node) -> (Node, Node) {
    let centroids: Vec<Vec<f64>> = node.entries.iter().map(|e| e.cf.centroid()).collect();
    let mut far = (0, 1, -1.0);
    for i in 0..centroids.len() {
        for j in i + 1..centroids.len() {
            let d = sq_dist(&centroids[i], &centroids[j]);
            if d > far.2 {
                far = (i, j, d);
            }
        }
    }
    let mut a = Node {
        leaf: node.leaf,
        entries: Vec::new(),
    };
    let mut b = Node {
        leaf: node.leaf,
        entries: Vec::new(),
    };
    for (i, e) in node.entries.into_iter().enumerate() {
        let to_a = i == far.0
            || (i != far.1 && sq_dist(&centroids[i], &centroids[far.0]) <= sq_dist(&centroids[i], &centroids[far.1]));
        if to_a {
            a.entries.push(e);
        } else {
            b.entries.push(e);
        }
    }
    (a, b)
}

struct Tree {
    root: Node,
    threshold: f64,
    branching: usize,
}

impl Tree {
    fn insert(&mut self, x: &[f64]) {
        let root = core::mem::replace(
            &mut self.root,
            Node {
                leaf: true,
                entries: Vec::new(),
            },
        );
        let (t, b) = (self.threshold, self.branching);
        self.root = match insert_into(root, x, t, b) {
            Inserted::Fits(n) => n,
            Inserted::Split(l, r) => Node {
                leaf: false,
                entries: alloc::vec![
                    Entry {
                        cf: summarize(&l),
                        child: Some(Box::new(l)),
                    },
                    Entry {
                        cf: summarize(&r),
                        child: Some(Box::new(r)),
                    },
                ],
            },
        };
    }

    fn leaves(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let mut stack = alloc::vec![&self.root];
        while let Some(n) = stack.pop() {
            if n.leaf {
                out.extend(n.entries.iter().map(|e| e.cf.centroid()));
            } else {
                // Reverse keeps left-to-right order on the stack.
                for e in n.entries.iter().rev() {
                    stack.push(e.child.as_deref().expect("inner entries have children"));
                }
            }
        }
        out
    }
}

enum Inserted {
    Fits(Node),
    Split(Node, Node),
}

fn insert_into(mut node: Node, x: &[f64], threshold: f64, branching: usize) -> Inserted {
    let point = Cf::point(x);
    if node.entries.is_empty() {
        node.entries.push(Entry {
            cf: point,
            child: None,
        });
        return Inserted::Fits(node);
    }
    let i = closest(&node.entries, x);
    if node.leaf {
        let mut merged = node.entries[i].cf.clone();
        merged.add(&point);
        if merged.radius() <= threshold {
            node.entries[i].cf = merged;
        } else {
            node.entries.push(Entry {
                cf: point,
                child: None,
            });
        }
    } else {
        let child = *node.entries[i].child.take().expect("inner entries have children");
        match insert_into(child, x, threshold, branching) {
            Inserted::Fits(c) => {
                node.entries[i].cf.add(&point);
                node.entries[i].child = Some(Box::new(c));
            }
            Inserted::Split(l, r) => {
                node.entries[i] = Entry {
                    cf: summarize(&l),
                    child: Some(Box::new(l)),
                };
                node.entries.insert(
                    i + 1,
                    Entry {
                        cf: summarize(&r),
                        child: Some(Box::new(r)),
                    },
                );
            }
        }
    }
    if node.entries.len() > branching {
        let (l, r) = split(node);
        Inserted::Split(l, r)
    } else {
        Inserted::Fits(node)
    }
}

pub(super) fn run(
    points: &Matrix,
    k: usize,
    threshold: f64,
    branching: usize,
    linkage: Linkage,
) -> Result<ClusterResult> {
    let mut tree = Tree {
        root: Node {
            leaf: true,
            entries: Vec::new(),
        },
        threshold,
        branching,
    };
    for x in points.iter_rows() {
        tree.insert(x);
    }
    let subclusters = Matrix::from_rows(&tree.leaves())?;
    if subclusters.rows() < k {
        return Err(Error::DegenerateClustering(format!(
            "Birch produced {} subclusters, fewer than k = {k}; lower the threshold",
            subclusters.rows()
        )));
    }
    let sub_label = agglomerate(&subclusters, k, linkage)?;
    let assignment: Vec<Option<usize>> = points
        .iter_rows()
        .map(|x| Some(sub_label[nearest(x, &subclusters).0]))
        .collect();
    let centers = means_of(points, &assignment, k);
    let objective = inertia(points, &centers, &assignment);
    Ok(ClusterResult {
        assignment,
        n_clusters: k,
        centers: Some(centers),
        diagnostics: Diagnostics {
            iterations: subclusters.rows(),
            objective,
            trace: Vec::new(),
        },
    })
}
