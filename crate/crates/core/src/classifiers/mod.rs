//! Binary classifiers with a shared train / score / predict contract.
//!
//! Every model maps a row to a score in `[0, 1]`; the predicted label is
//! `score >= 0.5`.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

mod gboost;
mod gnb;
mod knn;
mod linear;
pub mod mlp;
mod tree;

pub use gboost::Boosted;
pub use gnb::GaussianNb;
pub use knn::Neighbors;
pub use linear::{Linear, Platt};
pub use mlp::Network;
pub use tree::{Tree, TreeNode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lr,
    Ridge,
    SvmLinear,
    Gnb,
    Knn,
    Dtree,
    Rf,
    Gboost,
    Mlp,
    SgdLinear,
}

impl ModelKind {
    pub const ALL: [ModelKind; 10] = [
        ModelKind::Lr,
        ModelKind::Ridge,
        ModelKind::SvmLinear,
        ModelKind::Gnb,
        ModelKind::Knn,
        ModelKind::Dtree,
        ModelKind::Rf,
        ModelKind::Gboost,
        ModelKind::Mlp,
        ModelKind::SgdLinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::Ridge => "ridge",
            ModelKind::SvmLinear => "svm_linear",
            ModelKind::Gnb => "gnb",
            ModelKind::Knn => "knn",
            ModelKind::Dtree => "dtree",
            ModelKind::Rf => "rf",
            ModelKind::Gboost => "gboost",
            ModelKind::Mlp => "mlp",
            ModelKind::SgdLinear => "sgd_linear",
        }
    }

    pub fn from_name(s: &str) -> Option<ModelKind> {
        ModelKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Kinds that can be fitted on a single class.
    fn allows_single_class(self) -> bool {
        matches!(self, ModelKind::Gnb | ModelKind::Knn)
    }

    fn allowed(self) -> &'static [&'static str] {
        match self {
            ModelKind::Lr | ModelKind::SvmLinear | ModelKind::SgdLinear => &["learning_rate", "epochs", "lambda"],
            ModelKind::Ridge => &["lambda"],
            ModelKind::Gnb => &["var_smoothing"],
            ModelKind::Knn => &["k_neighbors"],
            ModelKind::Dtree => &["max_depth", "min_samples_leaf", "feature_fraction"],
            ModelKind::Rf => &["n_trees", "max_depth", "min_samples_leaf", "feature_fraction", "bootstrap"],
            ModelKind::Gboost => &["n_trees", "max_depth", "min_samples_leaf", "shrinkage", "subsample"],
            ModelKind::Mlp => &["learning_rate", "epochs", "lambda", "hidden_sizes", "batch_size"],
        }
    }
}

/// Optional named hyperparameters; unset fields take per-kind defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    /// L2 regularization strength.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_neighbors: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_samples_leaf: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_trees: Option<usize>,
    /// Fraction of features tried at each split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shrinkage: Option<f64>,
    /// Row fraction drawn without replacement per boosting round.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_sizes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var_smoothing: Option<f64>,
}

impl Hyperparams {
    fn set_fields(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut mark = |set: bool, name| {
            if set {
                out.push(name)
            }
        };
        mark(self.learning_rate.is_some(), "learning_rate");
        mark(self.epochs.is_some(), "epochs");
        mark(self.lambda.is_some(), "lambda");
        mark(self.k_neighbors.is_some(), "k_neighbors");
        mark(self.max_depth.is_some(), "max_depth");
        mark(self.min_samples_leaf.is_some(), "min_samples_leaf");
        mark(self.n_trees.is_some(), "n_trees");
        mark(self.feature_fraction.is_some(), "feature_fraction");
        mark(self.shrinkage.is_some(), "shrinkage");
        mark(self.subsample.is_some(), "subsample");
        mark(self.hidden_sizes.is_some(), "hidden_sizes");
        mark(self.batch_size.is_some(), "batch_size");
        mark(self.bootstrap.is_some(), "bootstrap");
        mark(self.var_smoothing.is_some(), "var_smoothing");
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    #[serde(default)]
    pub seed: u64,
}

fn positive(name: &'static str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::param(name, "must be positive and finite")),
        _ => Ok(()),
    }
}

fn fraction(name: &'static str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x > 0.0 && x <= 1.0) => Err(Error::param(name, "must lie in (0, 1]")),
        _ => Ok(()),
    }
}

fn at_least_one(name: &'static str, v: Option<usize>) -> Result<()> {
    match v {
        Some(0) => Err(Error::param(name, "must be at least 1")),
        _ => Ok(()),
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            hyperparams: Hyperparams::default(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_hyperparams(mut self, h: Hyperparams) -> Self {
        self.hyperparams = h;
        self
    }

    /// Rejects fields the kind does not use and out-of-range values.
    pub fn validate(&self) -> Result<()> {
        let h = &self.hyperparams;
        let allowed = self.kind.allowed();
        if let Some(bad) = h.set_fields().into_iter().find(|f| !allowed.contains(f)) {
            return Err(Error::param(
                "hyperparams",
                alloc::format!("`{bad}` does not apply to {}", self.kind.name()),
            ));
        }
        positive("learning_rate", h.learning_rate)?;
        positive("shrinkage", h.shrinkage)?;
        fraction("feature_fraction", h.feature_fraction)?;
        fraction("subsample", h.subsample)?;
        if h.shrinkage.is_some_and(|s| s > 1.0) {
            return Err(Error::param("shrinkage", "must not exceed 1"));
        }
        for (name, v) in [("lambda", h.lambda), ("var_smoothing", h.var_smoothing)] {
            if v.is_some_and(|x| !(x >= 0.0 && x.is_finite())) {
                return Err(Error::param(name, "must be non-negative and finite"));
            }
        }
        at_least_one("epochs", h.epochs)?;
        at_least_one("k_neighbors", h.k_neighbors)?;
        at_least_one("max_depth", h.max_depth)?;
        at_least_one("min_samples_leaf", h.min_samples_leaf)?;
        at_least_one("n_trees", h.n_trees)?;
        at_least_one("batch_size", h.batch_size)?;
        if let Some(hs) = &h.hidden_sizes {
            if hs.is_empty() || hs.contains(&0) {
                return Err(Error::param("hidden_sizes", "needs at least one layer, each of width >= 1"));
            }
        }
        Ok(())
    }
}

/// Training summary kept with the model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    /// Epochs, boosting rounds or trees, depending on the kind.
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
    /// Training loss after each iteration, where the kind tracks one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Params {
    Linear(Linear),
    Gnb(GaussianNb),
    Knn(Neighbors),
    Tree(Tree),
    Forest { trees: Vec<Tree> },
    Boosted(Boosted),
    Mlp(Network),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub dim: usize,
    pub info: FitInfo,
    pub params: Params,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

/// Mean log-loss of logits `z` against 0/1 labels.
pub(crate) fn logit_loss(z: &[f64], y: &[u8]) -> f64 {
    let s: f64 = z
        .iter()
        .zip(y)
        .map(|(&z, &y)| if y == 1 { softplus(-z) } else { softplus(z) })
        .sum();
    s / z.len() as f64
}

fn check_inputs(x: &Matrix, y: &[u8]) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::Empty("training rows"));
    }
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            found: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&l| l > 1) {
        return Err(Error::NonBinaryLabel(bad));
    }
    if !x.all_finite() {
        return Err(Error::NonFinite("training features"));
    }
    Ok(())
}

pub fn train(spec: &ModelSpec, x: &Matrix, y: &[u8]) -> Result<TrainedModel> {
    spec.validate()?;
    check_inputs(x, y)?;
    let n1 = y.iter().filter(|&&l| l == 1).count();
    if (n1 == 0 || n1 == y.len()) && !spec.kind.allows_single_class() {
        return Err(Error::SingleClass { model: spec.kind.name() });
    }
    let h = &spec.hyperparams;
    let (params, info) = match spec.kind {
        ModelKind::Lr => linear::fit_logistic(x, y, h),
        ModelKind::Ridge => linear::fit_ridge(x, y, h)?,
        ModelKind::SvmLinear => linear::fit_sgd(x, y, h, linear::Loss::Hinge, spec.seed),
        ModelKind::SgdLinear => linear::fit_sgd(x, y, h, linear::Loss::ModifiedHuber, spec.seed),
        ModelKind::Gnb => gnb::fit(x, y, h),
        ModelKind::Knn => knn::fit(x, y, h)?,
        ModelKind::Dtree => tree::fit_single(x, y, h, spec.seed),
        ModelKind::Rf => tree::fit_forest(x, y, h, spec.seed),
        ModelKind::Gboost => gboost::fit(x, y, h, spec.seed),
        ModelKind::Mlp => mlp::fit(x, y, h, spec.seed),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        dim: x.cols(),
        info,
        params,
    })
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    fn score_row(&self, r: &[f64]) -> f64 {
        match &self.params {
            Params::Linear(m) => m.score(r),
            Params::Gnb(m) => m.score(r),
            Params::Knn(m) => m.score(r),
            Params::Tree(t) => t.eval(r),
            Params::Forest { trees } => trees.iter().map(|t| t.eval(r)).sum::<f64>() / trees.len() as f64,
            Params::Boosted(m) => m.score(r),
            Params::Mlp(m) => m.score(r),
        }
    }

    /// Probability-like score of class 1 per row.
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.cols(),
            });
        }
        Ok(x.iter_rows().map(|r| self.score_row(r)).collect())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        Ok(self.score(x)?.into_iter().map(|s| u8::from(s >= 0.5)).collect())
    }

    /// Short description for reports, e.g. `rf(seed=3)`.
    pub fn describe(&self) -> String {
        alloc::format!("{}(seed={})", self.spec.kind.name(), self.spec.seed)
    }
}

#[cfg(test)]
mod tests;
