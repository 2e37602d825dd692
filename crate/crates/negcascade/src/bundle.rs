//! Self-describing model files consumed by `score` and `select-uncertain`.

use std::path::Path;

use negcascade_core::cascade::Cascade;
use negcascade_core::classifiers::TrainedModel;
use negcascade_core::linalg::Matrix;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Context, Error, Result};
use crate::features::FeaturePipeline;
use crate::io;

pub const BUNDLE_FORMAT: &str = "negcascade-bundle/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Predictor {
    Cascade(Cascade),
    Single(TrainedModel),
}

impl Predictor {
    pub fn dim(&self) -> usize {
        match self {
            Predictor::Cascade(c) => c.dim(),
            Predictor::Single(m) => m.dim,
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        match self {
            Predictor::Cascade(c) => c.run(x).map(|o| o.labels).failed("predict"),
            Predictor::Single(m) => m.predict(x).failed("predict"),
        }
    }

    /// Probability-like score used for uncertainty sampling: the model's own
    /// score, or stage A's for a cascade (stage A screens every record).
    pub fn screening_score(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self {
            Predictor::Cascade(c) => c.stage_a.score(x).failed("score"),
            Predictor::Single(m) => m.score(x).failed("score"),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Predictor::Cascade(c) => format!(
                "{} {}-{}",
                c.provenance.method_tag,
                c.stage_a.spec.kind.name(),
                c.stage_b.spec.kind.name()
            ),
            Predictor::Single(m) => format!("single {}", m.spec.kind.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub format: String,
    pub config: RunConfig,
    pub features: FeaturePipeline,
    pub predictor: Predictor,
}

impl Bundle {
    pub fn new(config: RunConfig, features: FeaturePipeline, predictor: Predictor) -> Self {
        Bundle {
            format: BUNDLE_FORMAT.into(),
            config,
            features,
            predictor,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let b: Bundle = io::read_json(path)?;
        if b.format != BUNDLE_FORMAT {
            return Err(Error::validation(format!(
                "{}: unsupported bundle format `{}`",
                path.display(),
                b.format
            )));
        }
        if b.features.dim() != b.predictor.dim() {
            return Err(Error::validation(format!(
                "{}: feature pipeline width {} does not match the model's {}",
                path.display(),
                b.features.dim(),
                b.predictor.dim()
            )));
        }
        Ok(b)
    }
}
