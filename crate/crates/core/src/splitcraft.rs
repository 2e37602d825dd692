//! Training-set relabeling for the two-stage model.
//!
//! Gold positives that look like negatives become "label 2" (`p2`): either
//! because their embedding is closer to the negative centroid than to the
//! positive one by more than a threshold (axis rule), or because they share
//! the cluster holding most negatives (cluster rule). The partition yields
//! the two stage training sets:
//!
//! | partition | stage A (ND1) | stage B (ND2) |
//! |-----------|---------------|---------------|
//! | `p0`      | 0             | excluded      |
//! | `p2`      | 1             | 0             |
//! | `n`       | 1             | 1             |

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::clustering::{cluster, ClusterMethod, ClusterResult};
use crate::dataset::{Dataset, Document, NEGATIVE, POSITIVE};
use crate::embed::cosine;
use crate::error::{Error, Result};

/// Class centroids of the training embeddings: `emb0` over positives,
/// `emb1` over negatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisEmbeddings {
    pub emb0: Vec<f64>,
    pub emb1: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionTag {
    /// Clean positive.
    P0,
    /// Positive that resembles the negatives.
    P2,
    /// Gold negative.
    N,
}

impl PartitionTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PartitionTag::P0 => "p0",
            PartitionTag::P2 => "p2",
            PartitionTag::N => "n",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainPartition {
    pub p0: BTreeSet<String>,
    pub p2: BTreeSet<String>,
    pub n: BTreeSet<String>,
    pub method_tag: String,
}

impl TrainPartition {
    pub fn tag_of(&self, id: &str) -> Option<PartitionTag> {
        if self.p0.contains(id) {
            Some(PartitionTag::P0)
        } else if self.p2.contains(id) {
            Some(PartitionTag::P2)
        } else if self.n.contains(id) {
            Some(PartitionTag::N)
        } else {
            None
        }
    }

    /// `(|p0|, |n|, |p2|)`, the column order of the label-count table.
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.p0.len(), self.n.len(), self.p2.len())
    }

    pub fn len(&self) -> usize {
        self.p0.len() + self.p2.len() + self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn gold(doc: &Document) -> Result<u8> {
    doc.label.ok_or_else(|| Error::Unlabeled { id: doc.id.clone() })
}

fn embedding(doc: &Document) -> Result<&[f64]> {
    doc.embedding
        .as_deref()
        .ok_or_else(|| Error::MissingEmbedding { id: doc.id.clone() })
}

pub fn axis_embeddings(train: &Dataset) -> Result<AxisEmbeddings> {
    let dim = train.dim().ok_or(Error::Empty("training embeddings"))?;
    let mut sums = [alloc::vec![0.0; dim], alloc::vec![0.0; dim]];
    let mut counts = [0usize; 2];
    for d in train {
        let l = gold(d)? as usize;
        let e = embedding(d)?;
        sums[l].iter_mut().zip(e).for_each(|(s, x)| *s += x);
        counts[l] += 1;
    }
    if counts[0] == 0 {
        return Err(Error::Empty("positive training records"));
    }
    if counts[1] == 0 {
        return Err(Error::Empty("negative training records"));
    }
    let [mut emb0, mut emb1] = sums;
    emb0.iter_mut().for_each(|x| *x /= counts[0] as f64);
    emb1.iter_mut().for_each(|x| *x /= counts[1] as f64);
    Ok(AxisEmbeddings { emb0, emb1 })
}

/// `cos(x, emb1) - cos(x, emb0)` for one embedding.
pub fn axis_score(x: &[f64], axes: &AxisEmbeddings) -> Result<f64> {
    Ok(cosine(x, &axes.emb1)? - cosine(x, &axes.emb0)?)
}

/// Axis rule: a gold positive goes to `p2` iff its axis score exceeds `t`
/// strictly; negatives always go to `n`.
pub fn assign_axis(train: &Dataset, axes: &AxisEmbeddings, cfg: ThresholdConfig) -> Result<TrainPartition> {
    if !cfg.t.is_finite() {
        return Err(Error::NonFinite("threshold"));
    }
    let mut part = TrainPartition {
        p0: BTreeSet::new(),
        p2: BTreeSet::new(),
        n: BTreeSet::new(),
        method_tag: format!("axis(t={})", cfg.t),
    };
    for d in train {
        let x = embedding(d)?;
        if gold(d)? == NEGATIVE {
            part.n.insert(d.id.clone());
        } else if axis_score(x, axes)? > cfg.t {
            part.p2.insert(d.id.clone());
        } else {
            part.p0.insert(d.id.clone());
        }
    }
    Ok(part)
}

/// Cluster rule: positives sharing the cluster with the most gold negatives
/// (lowest cluster index on ties) go to `p2`. DBSCAN noise never qualifies.
pub fn assign_cluster(train: &Dataset, method: &ClusterMethod, seed: u64) -> Result<TrainPartition> {
    assign_cluster_detailed(train, method, seed).map(|(p, _)| p)
}

/// [`assign_cluster`] that also hands back the clustering it used.
pub fn assign_cluster_detailed(
    train: &Dataset,
    method: &ClusterMethod,
    seed: u64,
) -> Result<(TrainPartition, ClusterResult)> {
    let labels = train.labels()?;
    let points = train.embedding_matrix()?;
    let res = cluster(&points, method, seed)?;
    let used: BTreeSet<usize> = res.assignment.iter().flatten().copied().collect();
    if used.len() <= 1 && res.assignment.iter().all(Option::is_some) {
        return Err(Error::DegenerateClustering(format!(
            "{} put all {} records in one cluster",
            method.name(),
            train.len()
        )));
    }
    let mut neg_counts = alloc::vec![0usize; res.n_clusters];
    for (a, &l) in res.assignment.iter().zip(&labels) {
        if let (Some(c), NEGATIVE) = (a, l) {
            neg_counts[*c] += 1;
        }
    }
    let target = neg_counts
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(c, _)| c);
    let mut part = TrainPartition {
        p0: BTreeSet::new(),
        p2: BTreeSet::new(),
        n: BTreeSet::new(),
        method_tag: format!("cluster({})", method.name()),
    };
    for ((d, a), &l) in train.iter().zip(&res.assignment).zip(&labels) {
        if l == NEGATIVE {
            part.n.insert(d.id.clone());
        } else if target.is_some() && *a == target {
            part.p2.insert(d.id.clone());
        } else {
            part.p0.insert(d.id.clone());
        }
    }
    Ok((part, res))
}

fn relabeled(train: &Dataset, part: &TrainPartition, rule: impl Fn(PartitionTag) -> Option<u8>) -> Result<Dataset> {
    let mut out = Vec::new();
    for d in train {
        let tag = part.tag_of(&d.id).ok_or_else(|| {
            Error::param("partition", format!("training record `{}` is not partitioned", d.id))
        })?;
        if let Some(label) = rule(tag) {
            let mut r = d.clone();
            r.label = Some(label);
            out.push(r);
        }
    }
    Dataset::new(out)
}

/// Stage-A training set: clean positives 0, label-2 positives and negatives 1.
pub fn build_nd1(part: &TrainPartition, train: &Dataset) -> Result<Dataset> {
    relabeled(train, part, |t| {
        Some(match t {
            PartitionTag::P0 => POSITIVE,
            PartitionTag::P2 | PartitionTag::N => NEGATIVE,
        })
    })
}

/// Stage-B training set: label-2 positives 0, negatives 1, clean positives dropped.
pub fn build_nd2(part: &TrainPartition, train: &Dataset) -> Result<Dataset> {
    if part.p2.is_empty() {
        return Err(Error::DegenerateSecondStage);
    }
    if part.n.is_empty() {
        return Err(Error::Empty("negatives for the second stage"));
    }
    relabeled(train, part, |t| match t {
        PartitionTag::P0 => None,
        PartitionTag::P2 => Some(POSITIVE),
        PartitionTag::N => Some(NEGATIVE),
    })
}
