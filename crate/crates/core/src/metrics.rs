//! Confusion counts, per-class precision/recall/F1 and the macro and
//! support-weighted F1 averages. Every report in the harness is computed here.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same counts seen from the other class.
    pub fn flipped(&self) -> Confusion {
        Confusion {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }

    /// Number of records whose gold label is the positive class.
    pub fn support(&self) -> u64 {
        self.tp + self.fn_
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8], positive_class: u8) -> Result<Confusion> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::Empty("label vectors"));
    }
    if positive_class > 1 {
        return Err(Error::NonBinaryLabel(positive_class));
    }
    let mut c = Confusion::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t > 1 {
            return Err(Error::NonBinaryLabel(t));
        }
        if p > 1 {
            return Err(Error::NonBinaryLabel(p));
        }
        match (t == positive_class, p == positive_class) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1. Zero denominators give zero.
pub fn prf1(c: &Confusion) -> Prf {
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Prf {
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, c.tp + c.fn_),
        f1: ratio(2 * c.tp, 2 * c.tp + c.fn_ + c.fp),
    }
}

/// Unweighted mean of per-class F1.
pub fn f1_macro(per_class: &[Prf]) -> Result<f64> {
    if per_class.is_empty() {
        return Err(Error::Empty("class reports"));
    }
    Ok(per_class.iter().map(|p| p.f1).sum::<f64>() / per_class.len() as f64)
}

/// Per-class F1 weighted by each class's share of the evaluation support.
pub fn f1_weighted(per_class: &[Prf], supports: &[u64]) -> Result<f64> {
    if per_class.len() != supports.len() {
        return Err(Error::DimensionMismatch {
            expected: per_class.len(),
            found: supports.len(),
        });
    }
    let total: u64 = supports.iter().sum();
    if total == 0 {
        return Err(Error::Empty("evaluation support"));
    }
    Ok(per_class
        .iter()
        .zip(supports)
        .map(|(p, &s)| p.f1 * s as f64 / total as f64)
        .sum())
}

/// One row of a results table: both classes' P/R/F1, the averages and the
/// confusion counts (positive class = 1, the negativity label).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub class1: Prf,
    pub class0: Prf,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub confusion: Confusion,
    pub provenance: String,
}

impl EvalReport {
    pub fn from_confusion(c: Confusion, provenance: impl Into<String>) -> Result<Self> {
        let class1 = prf1(&c);
        let class0 = prf1(&c.flipped());
        let per = [class1, class0];
        Ok(EvalReport {
            class1,
            class0,
            f1_macro: f1_macro(&per)?,
            f1_weighted: f1_weighted(&per, &[c.support(), c.flipped().support()])?,
            confusion: c,
            provenance: provenance.into(),
        })
    }

    pub fn accuracy(&self) -> f64 {
        let c = &self.confusion;
        (c.tp + c.tn) as f64 / c.total().max(1) as f64
    }
}

pub fn evaluate(y_true: &[u8], y_pred: &[u8], provenance: impl Into<String>) -> Result<EvalReport> {
    EvalReport::from_confusion(confusion(y_true, y_pred, 1)?, provenance)
}
