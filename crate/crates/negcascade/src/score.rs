//! Applying a bundle to an unlabeled pool: corpus scoring and uncertainty
//! sampling for annotation.

use std::collections::BTreeMap;
use std::path::Path;

use negcascade_core::dataset::{Dataset, Document};
use negcascade_core::embed::{doc_embedding, WordEmbeddings};
use negcascade_core::linalg::Matrix;
use negcascade_core::uncertainty;
use serde::{Deserialize, Serialize};

use crate::bundle::{Bundle, Predictor};
use crate::error::{Context, Error, Result};
use crate::io;

/// Features of every pool record. Records without an embedding get one
/// from `we` when possible; any record still without one is an error.
fn features(bundle: &Bundle, pool: &Dataset, we: Option<&WordEmbeddings>) -> Result<Matrix> {
    let mut tokens = BTreeMap::new();
    let mut docs: Vec<Document> = Vec::with_capacity(pool.len());
    for d in pool {
        let toks = bundle.features.tokenize(d);
        let mut d = d.clone();
        if d.embedding.is_none() {
            d.embedding = we.and_then(|we| doc_embedding(&toks, we));
        }
        if d.embedding.is_none() {
            return Err(Error::validation(format!("record `{}` cannot be scored: no embedding", d.id)));
        }
        tokens.insert(d.id.clone(), toks);
        docs.push(d);
    }
    let ds = Dataset::new(docs).invalid("pool")?;
    bundle.features.transform(&ds, &tokens)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub id: String,
    pub label: u8,
    pub stage_a_score: f64,
    /// Present for records stage A routed to stage B.
    pub stage_b_score: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub total: usize,
    pub negative: usize,
    pub positive: usize,
}

pub fn score_corpus(
    bundle: &Bundle,
    pool: &Dataset,
    we: Option<&WordEmbeddings>,
) -> Result<(Vec<ScoredRecord>, ScoreSummary)> {
    if pool.is_empty() {
        return Ok((Vec::new(), ScoreSummary::default()));
    }
    let x = features(bundle, pool, we)?;
    let rows: Vec<ScoredRecord> = match &bundle.predictor {
        Predictor::Cascade(c) => {
            let out = c.run(&x).failed("score")?;
            let sa = c.stage_a.score(&x).failed("score")?;
            let routed: Vec<usize> = (0..x.rows()).filter(|&i| out.stage_a[i] == 1).collect();
            let sb = c.stage_b.score(&x.select_rows(&routed)).failed("score")?;
            let mut sb_full = vec![None; x.rows()];
            for (&i, s) in routed.iter().zip(sb) {
                sb_full[i] = Some(s);
            }
            pool.iter()
                .enumerate()
                .map(|(i, d)| ScoredRecord {
                    id: d.id.clone(),
                    label: out.labels[i],
                    stage_a_score: sa[i],
                    stage_b_score: sb_full[i],
                })
                .collect()
        }
        Predictor::Single(m) => {
            let s = m.score(&x).failed("score")?;
            pool.iter()
                .zip(s)
                .map(|(d, s)| ScoredRecord {
                    id: d.id.clone(),
                    label: u8::from(s >= 0.5),
                    stage_a_score: s,
                    stage_b_score: None,
                })
                .collect()
        }
    };
    let negative = rows.iter().filter(|r| r.label == 1).count();
    let summary = ScoreSummary {
        total: rows.len(),
        negative,
        positive: rows.len() - negative,
    };
    Ok((rows, summary))
}

pub fn write_scores(path: &Path, rows: &[ScoredRecord]) -> Result<()> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.id.clone(),
                r.label.to_string(),
                r.stage_a_score.to_string(),
                r.stage_b_score.map(|s| s.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    io::write_csv(path, &["id", "label", "stage_a_score", "stage_b_score"], &rows)
}

/// The `n` pool ids whose screening score is closest to 0.5.
pub fn select_uncertain(bundle: &Bundle, pool: &Dataset, n: usize, we: Option<&WordEmbeddings>) -> Result<Vec<String>> {
    if n > pool.len() {
        return Err(Error::validation(format!("asked for {n} records from a pool of {}", pool.len())));
    }
    if pool.is_empty() {
        return Ok(Vec::new());
    }
    let x = features(bundle, pool, we)?;
    let scores = bundle.predictor.screening_score(&x)?;
    let ids: Vec<String> = pool.iter().map(|d| d.id.clone()).collect();
    uncertainty::select_uncertain(&ids, &scores, n).invalid("select-uncertain")
}
