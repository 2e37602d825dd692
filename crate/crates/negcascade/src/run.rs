//! End-to-end runs: load, prepare, split, relabel, train, evaluate, report.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use negcascade_core::cascade::{train_cascade, Cascade};
use negcascade_core::classifiers::{train, ModelSpec, TrainedModel};
use negcascade_core::clustering::ClusterResult;
use negcascade_core::dataset::{stratified_split, synth_generate, Dataset, SplitPair, NEGATIVE};
use negcascade_core::linalg::Matrix;
use negcascade_core::metrics::{evaluate, EvalReport};
use negcascade_core::resample::{self, ResampleConfig, ResampleReport};
use negcascade_core::splitcraft::{assign_axis, assign_cluster_detailed, axis_embeddings, TrainPartition};
use serde::{Deserialize, Serialize};

use crate::bundle::{Bundle, Predictor};
use crate::config::{Method, Mode, RunConfig};
use crate::error::{Context, Error, Result};
use crate::features::{prepare, FeaturePipeline, ResourceLists, Skipped};
use crate::io;
use crate::plot;

pub const TOOL: &str = concat!("negcascade ", env!("CARGO_PKG_VERSION"));

/// Everything shared by the runs of one config: the prepared data, the
/// fixed split and the fitted feature pipeline.
pub struct Experiment {
    pub config: RunConfig,
    pub inputs: BTreeMap<String, String>,
    pub loaded: usize,
    pub skipped: Vec<Skipped>,
    pub warnings: Vec<String>,
    pub split: SplitPair,
    pub pipeline: FeaturePipeline,
    pub x_train: Matrix,
    pub x_test: Matrix,
    pub y_train: Vec<u8>,
    pub y_test: Vec<u8>,
}

fn load_data(cfg: &RunConfig, inputs: &mut BTreeMap<String, String>) -> Result<Dataset> {
    if let Some(p) = &cfg.data.path {
        let p = cfg.resolve(p);
        inputs.insert("data".into(), io::sha256_file(&p)?);
        return io::load_jsonl(&p);
    }
    let s = cfg
        .data
        .synthetic
        .as_ref()
        .ok_or_else(|| Error::validation("config: no data source"))?;
    let ds = synth_generate(&s.geometry.spec(), s.seed).invalid("synthetic data")?;
    let mut bytes = Vec::new();
    io::write_jsonl(&ds, &mut bytes)?;
    inputs.insert("data".into(), io::sha256_bytes(&bytes));
    Ok(ds)
}

impl Experiment {
    pub fn prepare(config: &RunConfig) -> Result<Experiment> {
        config.validate()?;
        let mut inputs = BTreeMap::new();
        let mut warnings = Vec::new();
        let ds = load_data(config, &mut inputs)?;
        let loaded = ds.len();
        let we = match &config.word_vectors {
            Some(p) => {
                let p = config.resolve(p);
                inputs.insert("word_vectors".into(), io::sha256_file(&p)?);
                let (we, w) = io::load_word_vectors(&p)?;
                warnings.extend(w);
                Some(we)
            }
            None => None,
        };
        for (name, p) in config.resources.named() {
            inputs.insert(format!("resources.{name}"), io::sha256_file(&config.resolve(p))?);
        }
        let lists = ResourceLists::load(config)?;
        let prepared = prepare(
            ds,
            config.prep_level,
            &lists.resources(),
            we.as_ref(),
            config.features.drop_short_docs,
        )?;
        let split = stratified_split(&prepared.dataset, config.split.ratio, config.split.seed).invalid("split")?;
        let pipeline = FeaturePipeline::fit(&split.train, &prepared.tokens, lists, config.prep_level, &config.features)?;
        let x_train = pipeline.transform(&split.train, &prepared.tokens)?;
        let x_test = pipeline.transform(&split.test, &prepared.tokens)?;
        Ok(Experiment {
            y_train: split.train.labels().invalid("split")?,
            y_test: split.test.labels().invalid("split")?,
            config: config.clone(),
            inputs,
            loaded,
            skipped: prepared.skipped,
            warnings,
            split,
            pipeline,
            x_train,
            x_test,
        })
    }

    pub fn split_summary(&self) -> SplitSummary {
        let neg = |y: &[u8]| y.iter().filter(|&&l| l == NEGATIVE).count();
        SplitSummary {
            ratio: self.config.split.ratio,
            seed: self.config.split.seed,
            train: self.y_train.len(),
            test: self.y_test.len(),
            train_negatives: neg(&self.y_train),
            test_negatives: neg(&self.y_test),
        }
    }

    /// Relabels the training split with `method`.
    pub fn partition(&self, method: &Method) -> Result<(TrainPartition, Option<ClusterResult>)> {
        match method {
            Method::Axis(t) => {
                let axes = axis_embeddings(&self.split.train).failed("axis embeddings")?;
                Ok((assign_axis(&self.split.train, &axes, *t).failed("partition")?, None))
            }
            Method::Cluster(c) => {
                let (p, r) = assign_cluster_detailed(&self.split.train, &c.method, c.seed).failed("partition")?;
                Ok((p, Some(r)))
            }
        }
    }

    pub fn train_cascade(&self, part: &TrainPartition, a: &ModelSpec, b: &ModelSpec) -> Result<Cascade> {
        let r = &self.config.resample;
        train_cascade(a, b, &self.x_train, &self.split.train, part, &r.stage_a, &r.stage_b).failed("cascade")
    }

    pub fn train_single(&self, spec: &ModelSpec) -> Result<(TrainedModel, ResampleReport)> {
        let cfg = &self.config.resample.single;
        let (x, y, rep) = resample::apply(cfg, &self.x_train, &self.y_train, spec.seed).failed("resample")?;
        Ok((train(spec, &x, &y).failed("training")?, rep))
    }

    pub fn evaluate(&self, p: &Predictor, provenance: String) -> Result<EvalReport> {
        if self.y_test.is_empty() {
            return Err(Error::validation("evaluation: the test split is empty (split.ratio = 1)"));
        }
        let pred = p.predict(&self.x_test)?;
        evaluate(&self.y_test, &pred, provenance).failed("evaluation")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub ratio: f64,
    pub seed: u64,
    pub train: usize,
    pub test: usize,
    pub train_negatives: usize,
    pub test_negatives: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordSummary {
    pub loaded: usize,
    pub used: usize,
    pub skipped: Vec<Skipped>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub embedding_dim: usize,
    pub engineered: Vec<String>,
}

/// One Table-3 row: label counts of the relabeled training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub method: String,
    pub label_0: usize,
    pub label_1: usize,
    pub label_2: usize,
    pub total: usize,
}

impl PartitionSummary {
    pub fn of(method: String, part: &TrainPartition) -> Self {
        let (p0, n, p2) = part.counts();
        PartitionSummary {
            method,
            label_0: p0,
            label_1: n,
            label_2: p2,
            total: p0 + n + p2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub n_clusters: usize,
    pub sizes: Vec<usize>,
    pub noise: usize,
    pub iterations: usize,
    pub objective: f64,
}

impl ClusterSummary {
    pub fn of(r: &ClusterResult) -> Self {
        ClusterSummary {
            n_clusters: r.n_clusters,
            sizes: r.sizes(),
            noise: r.assignment.iter().filter(|a| a.is_none()).count(),
            iterations: r.diagnostics.iterations,
            objective: r.diagnostics.objective,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub stage: String,
    pub spec: ModelSpec,
    pub iterations: usize,
    pub final_loss: Option<f64>,
    pub resample: ResampleConfig,
    pub resampled: ResampleReport,
}

impl ModelSummary {
    fn of(stage: &str, m: &TrainedModel, resample: ResampleConfig, resampled: ResampleReport) -> Self {
        ModelSummary {
            stage: stage.into(),
            spec: m.spec.clone(),
            iterations: m.info.iterations,
            final_loss: m.info.final_loss,
            resample,
            resampled,
        }
    }

    pub fn of_predictor(p: &Predictor, single: ResampleConfig, single_rep: ResampleReport) -> Vec<Self> {
        match p {
            Predictor::Cascade(c) => vec![
                Self::of("a", &c.stage_a, c.provenance.resample_a, c.provenance.resampled_a),
                Self::of("b", &c.stage_b, c.provenance.resample_b, c.provenance.resampled_b),
            ],
            Predictor::Single(m) => vec![Self::of("single", m, single, single_rep)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub mode: String,
    pub config: RunConfig,
    pub inputs: BTreeMap<String, String>,
    pub records: RecordSummary,
    pub split: SplitSummary,
    pub features: FeatureSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clustering: Option<ClusterSummary>,
    pub models: Vec<ModelSummary>,
    pub evaluation: EvalReport,
}

pub const PARTITION_HEADER: [&str; 5] = ["method", "label_0", "label_1", "label_2", "total"];

pub fn partition_row(p: &PartitionSummary) -> Vec<String> {
    vec![
        p.method.clone(),
        p.label_0.to_string(),
        p.label_1.to_string(),
        p.label_2.to_string(),
        p.total.to_string(),
    ]
}

pub const SCORE_HEADER: [&str; 16] = [
    "method", "stage_a", "stage_b", "p_1", "r_1", "f1_1", "p_0", "r_0", "f1_0", "f1_macro", "f1_weighted", "tp", "fp",
    "fn", "tn", "provenance",
];

pub fn score_row(method: &str, a: &str, b: &str, e: &EvalReport) -> Vec<String> {
    let c = &e.confusion;
    vec![
        method.into(),
        a.into(),
        b.into(),
        e.class1.precision.to_string(),
        e.class1.recall.to_string(),
        e.class1.f1.to_string(),
        e.class0.precision.to_string(),
        e.class0.recall.to_string(),
        e.class0.f1.to_string(),
        e.f1_macro.to_string(),
        e.f1_weighted.to_string(),
        c.tp.to_string(),
        c.fp.to_string(),
        c.fn_.to_string(),
        c.tn.to_string(),
        e.provenance.clone(),
    ]
}

/// Id, gold label and partition tag of every training record.
pub fn write_partition_audit(path: &Path, train: &Dataset, part: &TrainPartition) -> Result<()> {
    let rows = train
        .iter()
        .map(|d| {
            let tag = part
                .tag_of(&d.id)
                .ok_or_else(|| Error::runtime(format!("partition: `{}` is not partitioned", d.id)))?;
            Ok(vec![
                d.id.clone(),
                d.label.map(|l| l.to_string()).unwrap_or_default(),
                tag.as_str().to_string(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    io::write_csv(path, &["id", "gold_label", "partition"], &rows)
}

pub struct RunOutcome {
    pub report: RunReport,
    pub bundle: Bundle,
    pub partition: Option<TrainPartition>,
}

/// Trains and evaluates the configured cascade or single baseline.
pub fn execute(exp: &Experiment) -> Result<RunOutcome> {
    let cfg = &exp.config;
    let mode = cfg.mode()?;
    let (predictor, partition, clustering, single_rep) = match &mode {
        Mode::Cascade {
            method,
            stage_a,
            stage_b,
        } => {
            let (part, cl) = exp.partition(method)?;
            let c = exp.train_cascade(&part, stage_a, stage_b)?;
            (Predictor::Cascade(c), Some(part), cl, ResampleReport::default())
        }
        Mode::Single(spec) => {
            let (m, rep) = exp.train_single(spec)?;
            (Predictor::Single(m), None, None, rep)
        }
    };
    let evaluation = exp.evaluate(&predictor, predictor.describe())?;
    let report = RunReport {
        tool: TOOL.into(),
        mode: match mode {
            Mode::Cascade { .. } => "cascade".into(),
            Mode::Single(_) => "single".into(),
        },
        config: cfg.clone(),
        inputs: exp.inputs.clone(),
        records: RecordSummary {
            loaded: exp.loaded,
            used: exp.split.train.len() + exp.split.test.len(),
            skipped: exp.skipped.clone(),
        },
        split: exp.split_summary(),
        features: FeatureSummary {
            embedding_dim: exp.pipeline.embedding_dim,
            engineered: exp.pipeline.engineered.as_ref().map(|e| e.names.clone()).unwrap_or_default(),
        },
        partition: match (&mode, &partition) {
            (Mode::Cascade { method, .. }, Some(p)) => Some(PartitionSummary::of(method.label(), p)),
            _ => None,
        },
        clustering: clustering.as_ref().map(ClusterSummary::of),
        models: ModelSummary::of_predictor(&predictor, cfg.resample.single, single_rep),
        evaluation,
    };
    let bundle = Bundle::new(cfg.clone(), exp.pipeline.clone(), predictor);
    Ok(RunOutcome {
        report,
        bundle,
        partition,
    })
}

fn stage_names(p: &Predictor) -> (String, String) {
    match p {
        Predictor::Cascade(c) => (c.stage_a.spec.kind.name().into(), c.stage_b.spec.kind.name().into()),
        Predictor::Single(m) => (m.spec.kind.name().into(), String::new()),
    }
}

/// Writes report.json, table3.csv, table4.csv, bundle.json, and for
/// cascades partition.csv; plus the training-split scatter when enabled.
pub fn write_outputs(exp: &Experiment, out: &RunOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let r = &out.report;
    io::write_json(&dir.join("report.json"), r)?;
    let t3 = match &r.partition {
        Some(p) => partition_row(p),
        None => {
            // Single mode: the training split's own label counts.
            let s = &r.split;
            vec![
                "none".into(),
                (s.train - s.train_negatives).to_string(),
                s.train_negatives.to_string(),
                "0".into(),
                s.train.to_string(),
            ]
        }
    };
    io::write_csv(&dir.join("table3.csv"), &PARTITION_HEADER, &[t3])?;
    let method = r.partition.as_ref().map_or("none".to_string(), |p| p.method.clone());
    let (a, b) = stage_names(&out.bundle.predictor);
    io::write_csv(
        &dir.join("table4.csv"),
        &SCORE_HEADER,
        &[score_row(&method, &a, &b, &r.evaluation)],
    )?;
    if let Some(part) = &out.partition {
        write_partition_audit(&dir.join("partition.csv"), &exp.split.train, part)?;
    }
    out.bundle.save(&dir.join("bundle.json"))?;
    if exp.config.outputs.scatter {
        let part = out.partition.as_ref();
        let (points, model) = plot::scatter_points(&exp.split.train, |d| match part.and_then(|p| p.tag_of(&d.id)) {
            Some(t) => t.as_str().to_string(),
            None => d.label.map_or(String::new(), |l| format!("label_{l}")),
        })?;
        let o = &exp.config.outputs;
        plot::write_scatter(dir, &points, &model, &o.positive_color, &o.negative_color)?;
    }
    Ok(())
}

/// `run`: prepare, execute, write. Returns the report.
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<RunReport> {
    let exp = Experiment::prepare(cfg)?;
    let out = execute(&exp)?;
    write_outputs(&exp, &out, dir)?;
    Ok(out.report)
}
