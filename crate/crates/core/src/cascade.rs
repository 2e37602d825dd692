//! Two-stage classifier. Stage A separates clean positives from everything
//! that looks negative; stage B re-judges only what stage A called 1,
//! separating true negatives from positives that merely resemble them.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::classifiers::{train, ModelSpec, TrainedModel};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::resample::{self, ResampleConfig, ResampleReport};
use crate::splitcraft::{build_nd1, build_nd2, TrainPartition};

/// Anything that labels rows. Lets routing be checked with instrumented
/// stand-ins.
pub trait Stage {
    fn predict(&self, x: &Matrix) -> Result<Vec<u8>>;
}

impl Stage for TrainedModel {
    fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        TrainedModel::predict(self, x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeProvenance {
    pub method_tag: String,
    /// `|p0|, |n|, |p2|` of the training partition.
    pub p0: usize,
    pub n: usize,
    pub p2: usize,
    pub resample_a: ResampleConfig,
    pub resample_b: ResampleConfig,
    pub resampled_a: ResampleReport,
    pub resampled_b: ResampleReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cascade {
    pub stage_a: TrainedModel,
    pub stage_b: TrainedModel,
    pub provenance: CascadeProvenance,
}

/// Per-stage outputs of one cascade pass.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CascadeOutput {
    pub stage_a: Vec<u8>,
    /// Stage-B label for rows stage A routed to it, `None` elsewhere.
    pub stage_b: Vec<Option<u8>>,
    pub labels: Vec<u8>,
}

/// Selects the rows of `x` (aligned with `train`) that appear in `sub`, in
/// `sub`'s order, with `sub`'s labels.
fn rows_for(x: &Matrix, train: &Dataset, sub: &Dataset) -> Result<(Matrix, Vec<u8>)> {
    let pos: BTreeMap<&str, usize> = train.iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect();
    let idx = sub
        .iter()
        .map(|d| {
            pos.get(d.id.as_str())
                .copied()
                .ok_or_else(|| Error::param("partition", alloc::format!("`{}` is not a training record", d.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((x.select_rows(&idx), sub.labels()?))
}

fn fit_stage(spec: &ModelSpec, x: &Matrix, y: &[u8], cfg: &ResampleConfig) -> Result<(TrainedModel, ResampleReport)> {
    let (x, y, report) = resample::apply(cfg, x, y, spec.seed)?;
    Ok((train(spec, &x, &y)?, report))
}

/// Fits stage A on the first relabeled set and stage B on the second.
/// `x` holds one feature row per record of `train`, in the same order.
pub fn train_cascade(
    spec_a: &ModelSpec,
    spec_b: &ModelSpec,
    x: &Matrix,
    train: &Dataset,
    part: &TrainPartition,
    resample_a: &ResampleConfig,
    resample_b: &ResampleConfig,
) -> Result<Cascade> {
    if x.rows() != train.len() {
        return Err(Error::DimensionMismatch {
            expected: train.len(),
            found: x.rows(),
        });
    }
    let nd2 = build_nd2(part, train)?;
    let nd1 = build_nd1(part, train)?;
    let (xa, ya) = rows_for(x, train, &nd1)?;
    let (xb, yb) = rows_for(x, train, &nd2)?;
    let (stage_a, resampled_a) = fit_stage(spec_a, &xa, &ya, resample_a)?;
    let (stage_b, resampled_b) = fit_stage(spec_b, &xb, &yb, resample_b)?;
    let (p0, n, p2) = part.counts();
    Ok(Cascade {
        stage_a,
        stage_b,
        provenance: CascadeProvenance {
            method_tag: part.method_tag.clone(),
            p0,
            n,
            p2,
            resample_a: *resample_a,
            resample_b: *resample_b,
            resampled_a,
            resampled_b,
        },
    })
}

/// Runs stage A on every row and stage B only on rows stage A labeled 1;
/// the final label is 1 iff both stages say 1.
pub fn compose(a: &dyn Stage, b: &dyn Stage, x: &Matrix) -> Result<CascadeOutput> {
    let first = a.predict(x)?;
    let routed: Vec<usize> = (0..first.len()).filter(|&i| first[i] == 1).collect();
    let mut second = alloc::vec![None; first.len()];
    let mut labels = alloc::vec![0u8; first.len()];
    if !routed.is_empty() {
        let out = b.predict(&x.select_rows(&routed))?;
        for (&i, &l) in routed.iter().zip(&out) {
            second[i] = Some(l);
            labels[i] = l;
        }
    }
    Ok(CascadeOutput {
        stage_a: first,
        stage_b: second,
        labels,
    })
}

impl Cascade {
    pub fn dim(&self) -> usize {
        self.stage_a.dim
    }

    pub fn run(&self, x: &Matrix) -> Result<CascadeOutput> {
        compose(&self.stage_a, &self.stage_b, x)
    }
}

pub fn predict_cascade(c: &Cascade, x: &Matrix) -> Result<Vec<u8>> {
    Ok(c.run(x)?.labels)
}
