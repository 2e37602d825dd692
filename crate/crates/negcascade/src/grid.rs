//! Grid search over relabeling methods and stage model pairs on one fixed
//! split, run in parallel and ranked by the selection metric.

use std::fs;
use std::path::Path;

use negcascade_core::classifiers::ModelSpec;
use negcascade_core::metrics::EvalReport;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{Bundle, Predictor};
use crate::config::{GridSpec, RunConfig, SelectionMetric};
use crate::error::{Error, Result};
use crate::io;
use crate::run::{partition_row, score_row, Experiment, PartitionSummary, SplitSummary, PARTITION_HEADER, SCORE_HEADER, TOOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub rank: usize,
    pub best: bool,
    /// Position in the enumeration order; also mixed into the cell's seeds.
    pub cell: usize,
    pub method: String,
    pub stage_a: String,
    #[serde(default)]
    pub stage_b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvalReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub tool: String,
    pub config: RunConfig,
    pub inputs: std::collections::BTreeMap<String, String>,
    pub split: SplitSummary,
    pub metric: SelectionMetric,
    pub partitions: Vec<PartitionSummary>,
    pub rows: Vec<GridRow>,
}

#[allow(clippy::large_enum_variant)]
enum Cell {
    Cascade { method: usize, a: ModelSpec, b: ModelSpec },
    Single(ModelSpec),
}

fn with_seed(s: &ModelSpec, cell: usize) -> ModelSpec {
    let mut s = s.clone();
    s.seed ^= cell as u64;
    s
}

fn cells(gs: &GridSpec, n_methods: usize) -> Vec<Cell> {
    let mut out = Vec::new();
    for m in 0..n_methods {
        for a in &gs.stage_a {
            for b in &gs.stage_b {
                let i = out.len();
                out.push(Cell::Cascade {
                    method: m,
                    a: with_seed(a, i),
                    b: with_seed(b, i),
                });
            }
        }
    }
    for s in &gs.single {
        let i = out.len();
        out.push(Cell::Single(with_seed(s, i)));
    }
    out
}

fn metric_of(m: SelectionMetric, e: &EvalReport) -> f64 {
    match m {
        SelectionMetric::F1Macro => e.f1_macro,
        SelectionMetric::F1Weighted => e.f1_weighted,
    }
}

pub struct GridOutcome {
    pub report: GridReport,
    /// Bundle of the best cell, if any cell succeeded.
    pub best: Option<Bundle>,
}

/// Runs every cell. A failing cell records its error and the grid goes on.
pub fn grid(exp: &Experiment, gs: &GridSpec) -> Result<GridOutcome> {
    gs.validate()?;
    let methods = gs.methods();
    let partitions: Vec<Result<_>> = methods.par_iter().map(|m| exp.partition(m)).collect();
    let cells = cells(gs, methods.len());
    let results: Vec<(GridRow, Option<Predictor>)> = cells
        .par_iter()
        .enumerate()
        .map(|(i, cell)| {
            let (method, a, b) = match cell {
                Cell::Cascade { method, a, b } => (methods[*method].label(), a.kind.name(), b.kind.name()),
                Cell::Single(s) => ("none".to_string(), s.kind.name(), ""),
            };
            let trained = match cell {
                Cell::Cascade { method, a, b } => match &partitions[*method] {
                    Ok((part, _)) => exp.train_cascade(part, a, b).map(Predictor::Cascade),
                    Err(e) => Err(Error::runtime(e)),
                },
                Cell::Single(s) => exp.train_single(s).map(|(m, _)| Predictor::Single(m)),
            };
            let evaluated = trained.and_then(|p| {
                let e = exp.evaluate(&p, format!("cell {i}: {}", p.describe()))?;
                Ok((p, e))
            });
            let (evaluation, error, pred) = match evaluated {
                Ok((p, e)) => (Some(e), None, Some(p)),
                Err(e) => (None, Some(e.to_string()), None),
            };
            let row = GridRow {
                rank: 0,
                best: false,
                cell: i,
                method,
                stage_a: a.into(),
                stage_b: b.into(),
                evaluation,
                error,
            };
            (row, pred)
        })
        .collect();
    let mut order: Vec<usize> = (0..results.len()).collect();
    // Successful cells by metric (descending), then failures; ties by cell.
    order.sort_by(|&i, &j| {
        let key = |k: usize| results[k].0.evaluation.as_ref().map(|e| metric_of(gs.metric, e));
        match (key(i), key(j)) {
            (Some(a), Some(b)) => b.total_cmp(&a).then(i.cmp(&j)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => i.cmp(&j),
        }
    });
    let mut rows = Vec::with_capacity(order.len());
    let mut best = None;
    let mut results: Vec<Option<(GridRow, Option<Predictor>)>> = results.into_iter().map(Some).collect();
    for (rank, &i) in order.iter().enumerate() {
        let (mut row, pred) = results[i].take().expect("each cell ranked once");
        row.rank = rank + 1;
        if rank == 0 && row.evaluation.is_some() {
            row.best = true;
            best = pred.map(|p| Bundle::new(exp.config.clone(), exp.pipeline.clone(), p));
        }
        rows.push(row);
    }
    let partition_rows = methods
        .iter()
        .zip(&partitions)
        .filter_map(|(m, p)| p.as_ref().ok().map(|(p, _)| PartitionSummary::of(m.label(), p)))
        .collect();
    Ok(GridOutcome {
        report: GridReport {
            tool: TOOL.into(),
            config: exp.config.clone(),
            inputs: exp.inputs.clone(),
            split: exp.split_summary(),
            metric: gs.metric,
            partitions: partition_rows,
            rows,
        },
        best,
    })
}

/// Writes grid.json, table3.csv (one row per method), table4.csv (ranked
/// rows with a `best` column and any cell error) and the best bundle.
pub fn write_grid_outputs(out: &GridOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    io::write_json(&dir.join("grid.json"), &out.report)?;
    let t3: Vec<Vec<String>> = out.report.partitions.iter().map(partition_row).collect();
    io::write_csv(&dir.join("table3.csv"), &PARTITION_HEADER, &t3)?;
    let mut header = vec!["rank", "best", "cell"];
    header.extend(SCORE_HEADER);
    header.push("error");
    let t4: Vec<Vec<String>> = out
        .report
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![r.rank.to_string(), r.best.to_string(), r.cell.to_string()];
            match &r.evaluation {
                Some(e) => v.extend(score_row(&r.method, &r.stage_a, &r.stage_b, e)),
                None => {
                    v.extend([r.method.clone(), r.stage_a.clone(), r.stage_b.clone()]);
                    v.extend(std::iter::repeat_n(String::new(), SCORE_HEADER.len() - 3));
                }
            }
            v.push(r.error.clone().unwrap_or_default());
            v
        })
        .collect();
    io::write_csv(&dir.join("table4.csv"), &header, &t4)?;
    if let Some(b) = &out.best {
        b.save(&dir.join("bundle.json"))?;
    }
    Ok(())
}

pub fn run_grid(cfg: &RunConfig, dir: &Path) -> Result<GridReport> {
    let gs = cfg
        .grid
        .as_ref()
        .ok_or_else(|| Error::validation("config: `grid` section is required for the grid command"))?;
    gs.validate()?;
    let exp = Experiment::prepare(cfg)?;
    let out = grid(&exp, gs)?;
    write_grid_outputs(&out, dir)?;
    Ok(out.report)
}
