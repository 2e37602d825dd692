//! The JSON run configuration shared by `run`, `grid`, `score` and friends.

use std::path::{Path, PathBuf};

use negcascade_core::classifiers::ModelSpec;
use negcascade_core::clustering::ClusterMethod;
use negcascade_core::dataset::SynthSpec;
use negcascade_core::resample::ResampleConfig;
use negcascade_core::splitcraft::ThresholdConfig;
use negcascade_core::textprep::{FeatureConfig, PrepLevel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_vectors: Option<PathBuf>,
    #[serde(default)]
    pub resources: ResourcePaths,
    #[serde(default = "default_level")]
    pub prep_level: PrepLevel,
    #[serde(default)]
    pub features: FeatureOptions,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub method: MethodConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_a: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_b: Option<ModelSpec>,
    /// Single-model baseline trained on the raw training split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single: Option<ModelSpec>,
    #[serde(default)]
    pub resample: ResampleStages,
    #[serde(default)]
    pub outputs: OutputOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Left out of report snapshots so a run can be replayed into another
    /// directory with identical reports.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    /// Directory relative paths are resolved against; not part of the document.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_level() -> PrepLevel {
    PrepLevel::L3
}

/// Exactly one of `path` and `synthetic`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticData>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticData {
    pub geometry: Geometry,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    OverlapBenchmark { n: usize, overlap_fraction: f64 },
    Custom(SynthSpec),
}

impl Geometry {
    pub fn spec(&self) -> SynthSpec {
        match self {
            Geometry::OverlapBenchmark { n, overlap_fraction } => SynthSpec::overlap_benchmark(*n, *overlap_fraction),
            Geometry::Custom(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourcePaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emoji_map: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insults: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persons: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orgs: Option<PathBuf>,
}

impl ResourcePaths {
    pub fn named(&self) -> Vec<(&'static str, &Path)> {
        [
            ("stopwords", &self.stopwords),
            ("emoji_map", &self.emoji_map),
            ("insults", &self.insults),
            ("persons", &self.persons),
            ("orgs", &self.orgs),
        ]
        .into_iter()
        .filter_map(|(n, p)| p.as_deref().map(|p| (n, p)))
        .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureOptions {
    /// Use the document embedding alone, without engineered features.
    pub embedding_only: bool,
    /// n-grams kept per class and order for the metatext family.
    pub k_per_class: usize,
    /// Drop documents whose preprocessed text is shorter than 3 characters.
    pub drop_short_docs: bool,
    pub families: FeatureConfig,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions {
            embedding_only: false,
            k_per_class: 20,
            drop_short_docs: false,
            families: FeatureConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub ratio: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { ratio: 0.85, seed: 42 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<ThresholdConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<ClusterConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    #[serde(flatten)]
    pub method: ClusterMethod,
    #[serde(default)]
    pub seed: u64,
}

/// A validated relabeling method.
#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    Axis(ThresholdConfig),
    Cluster(ClusterConfig),
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Axis(t) => format!("axis(t={})", t.t),
            Method::Cluster(c) => format!("cluster({})", c.method.name()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResampleStages {
    pub stage_a: ResampleConfig,
    pub stage_b: ResampleConfig,
    pub single: ResampleConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputOptions {
    /// Write a PCA scatter of the training split.
    pub scatter: bool,
    pub positive_color: String,
    pub negative_color: String,
}

impl Default for OutputOptions {
    fn default() -> Self {
        OutputOptions {
            scatter: true,
            positive_color: "purple".into(),
            negative_color: "red".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    #[default]
    F1Macro,
    F1Weighted,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub cluster_methods: Vec<ClusterConfig>,
    pub stage_a: Vec<ModelSpec>,
    pub stage_b: Vec<ModelSpec>,
    /// Optional single-model baselines ranked alongside the cascades.
    #[serde(default)]
    pub single: Vec<ModelSpec>,
    #[serde(default)]
    pub metric: SelectionMetric,
}

impl GridSpec {
    pub fn methods(&self) -> Vec<Method> {
        let axis = self.thresholds.iter().map(|&t| Method::Axis(ThresholdConfig { t }));
        axis.chain(self.cluster_methods.iter().cloned().map(Method::Cluster)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.thresholds.is_empty() && self.cluster_methods.is_empty() {
            return Err(Error::validation("grid: needs at least one threshold or cluster method"));
        }
        if self.stage_a.is_empty() || self.stage_b.is_empty() {
            return Err(Error::validation("grid: stage_a and stage_b lists must be non-empty"));
        }
        if let Some(t) = self.thresholds.iter().find(|t| !t.is_finite()) {
            return Err(Error::validation(format!("grid: threshold {t} is not finite")));
        }
        for c in &self.cluster_methods {
            c.method.validate().map_err(|e| Error::validation(format!("grid: {e}")))?;
        }
        for s in self.stage_a.iter().chain(&self.stage_b).chain(&self.single) {
            s.validate().map_err(|e| Error::validation(format!("grid: {e}")))?;
        }
        Ok(())
    }
}

/// What a validated config asks `run` to train.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq)]
pub enum Mode {
    Cascade { method: Method, stage_a: ModelSpec, stage_b: ModelSpec },
    Single(ModelSpec),
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::validation(format!("config: {e}")))
    }

    /// Loads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.base_dir = Some(base.to_path_buf());
        Ok(cfg)
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = Some(dir.into());
        self
    }

    /// Resolves a path from the config against its directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn method(&self) -> Result<Option<Method>> {
        match (&self.method.axis, &self.method.cluster) {
            (Some(_), Some(_)) => Err(Error::validation("config: set exactly one of method.axis and method.cluster")),
            (Some(t), None) if !t.t.is_finite() => Err(Error::validation("config: method.axis.t must be finite")),
            (Some(t), None) => Ok(Some(Method::Axis(*t))),
            (None, Some(c)) => {
                c.method.validate().map_err(|e| Error::validation(format!("config: {e}")))?;
                Ok(Some(Method::Cluster(c.clone())))
            }
            (None, None) => Ok(None),
        }
    }

    pub fn mode(&self) -> Result<Mode> {
        let method = self.method()?;
        match (&self.stage_a, &self.stage_b, &self.single) {
            (Some(a), Some(b), None) => {
                let method = method.ok_or_else(|| {
                    Error::validation("config: a cascade needs method.axis or method.cluster")
                })?;
                for s in [a, b] {
                    s.validate().map_err(|e| Error::validation(format!("config: {e}")))?;
                }
                Ok(Mode::Cascade {
                    method,
                    stage_a: a.clone(),
                    stage_b: b.clone(),
                })
            }
            (None, None, Some(s)) => {
                s.validate().map_err(|e| Error::validation(format!("config: {e}")))?;
                Ok(Mode::Single(s.clone()))
            }
            _ => Err(Error::validation(
                "config: set either both stage_a and stage_b, or single",
            )),
        }
    }

    /// Checks everything that can be checked without reading data.
    pub fn validate(&self) -> Result<()> {
        match (&self.data.path, &self.data.synthetic) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return Err(Error::validation("config: set exactly one of data.path and data.synthetic")),
        }
        if !(self.split.ratio > 0.0 && self.split.ratio <= 1.0) {
            return Err(Error::validation("config: split.ratio must be in (0, 1]"));
        }
        for (stage, r) in [
            ("stage_a", &self.resample.stage_a),
            ("stage_b", &self.resample.stage_b),
            ("single", &self.resample.single),
        ] {
            r.validate().map_err(|e| Error::validation(format!("config: resample.{stage}: {e}")))?;
        }
        let mut files: Vec<&Path> = self.resources.named().into_iter().map(|(_, p)| p).collect();
        files.extend(self.data.path.as_deref());
        files.extend(self.word_vectors.as_deref());
        for f in files {
            let p = self.resolve(f);
            if !p.is_file() {
                return Err(Error::validation(format!("config: file not found: {}", p.display())));
            }
        }
        Ok(())
    }
}
