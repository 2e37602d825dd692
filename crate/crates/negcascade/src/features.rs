//! Text preparation, document embedding and the fitted feature pipeline
//! (embedding followed by standardized engineered features).

use std::collections::BTreeMap;

use negcascade_core::dataset::{Dataset, Document};
use negcascade_core::embed::{doc_embedding, standardize_fit, Scaler, WordEmbeddings};
use negcascade_core::linalg::Matrix;
use negcascade_core::textprep::{
    build_ngram_vocab, extract_features, is_removable, preprocess, FeatureConfig, NgramVocab, PrepLevel, PrepResources,
};
use serde::{Deserialize, Serialize};

use crate::config::{FeatureOptions, RunConfig};
use crate::error::{Context, Error, Result};
use crate::io;

/// Word lists as read from the resource files, kept verbatim so bundles
/// can rebuild the exact preprocessing later.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourceLists {
    #[serde(default)]
    pub stopwords: Vec<String>,
    #[serde(default)]
    pub emoji_map: Vec<(String, String)>,
    #[serde(default)]
    pub insults: Vec<String>,
    #[serde(default)]
    pub persons: Vec<String>,
    #[serde(default)]
    pub orgs: Vec<String>,
}

impl ResourceLists {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let r = &cfg.resources;
        let list = |p: &Option<std::path::PathBuf>| -> Result<Vec<String>> {
            p.as_deref().map_or(Ok(Vec::new()), |p| io::load_list(&cfg.resolve(p)))
        };
        Ok(ResourceLists {
            stopwords: list(&r.stopwords)?,
            emoji_map: match &r.emoji_map {
                Some(p) => io::load_emoji_map(&cfg.resolve(p))?,
                None => Vec::new(),
            },
            insults: list(&r.insults)?,
            persons: list(&r.persons)?,
            orgs: list(&r.orgs)?,
        })
    }

    pub fn resources(&self) -> PrepResources {
        PrepResources::new(
            &self.stopwords,
            self.emoji_map.iter().cloned(),
            &self.insults,
            &self.persons,
            &self.orgs,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Skipped {
    pub id: String,
    pub reason: String,
}

/// Documents that survived preparation, with their tokens.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub dataset: Dataset,
    pub tokens: BTreeMap<String, Vec<String>>,
    pub skipped: Vec<Skipped>,
}

pub fn tokens_of(doc: &Document, level: PrepLevel, res: &PrepResources) -> Vec<String> {
    doc.text.as_deref().map(|t| preprocess(t, level, res)).unwrap_or_default()
}

/// Tokenizes every document, fills missing embeddings from `we`, and sets
/// aside documents that end up without an embedding (or, with
/// `drop_short`, whose text preprocesses to fewer than 3 characters).
pub fn prepare(
    ds: Dataset,
    level: PrepLevel,
    res: &PrepResources,
    we: Option<&WordEmbeddings>,
    drop_short: bool,
) -> Result<Prepared> {
    let mut kept = Vec::with_capacity(ds.len());
    let mut tokens = BTreeMap::new();
    let mut skipped = Vec::new();
    for mut d in ds.into_records() {
        let toks = tokens_of(&d, level, res);
        if drop_short && d.text.is_some() && is_removable(&toks) {
            skipped.push(Skipped {
                id: d.id,
                reason: "text shorter than 3 characters after preprocessing".into(),
            });
            continue;
        }
        if d.embedding.is_none() {
            d.embedding = we.and_then(|we| doc_embedding(&toks, we));
        }
        if d.embedding.is_none() {
            skipped.push(Skipped {
                id: d.id,
                reason: "no embedding".into(),
            });
            continue;
        }
        tokens.insert(d.id.clone(), toks);
        kept.push(d);
    }
    let dataset = Dataset::new(kept).invalid("embeddings")?;
    Ok(Prepared {
        dataset,
        tokens,
        skipped,
    })
}

/// Engineered-feature half of the pipeline: the vocabulary and scaler fitted
/// on the training split, and the columns that varied there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Engineered {
    pub config: FeatureConfig,
    pub vocab: NgramVocab,
    pub names: Vec<String>,
    pub scaler: Scaler,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipeline {
    pub level: PrepLevel,
    pub embedding_dim: usize,
    pub resources: ResourceLists,
    pub engineered: Option<Engineered>,
}

fn empty_tokens() -> &'static Vec<String> {
    static EMPTY: Vec<String> = Vec::new();
    &EMPTY
}

impl FeaturePipeline {
    /// Fits on the training split. Engineered columns that are constant on
    /// the training split carry no information and are left out.
    pub fn fit(
        train: &Dataset,
        tokens: &BTreeMap<String, Vec<String>>,
        resources: ResourceLists,
        level: PrepLevel,
        opts: &FeatureOptions,
    ) -> Result<Self> {
        let embedding_dim = train
            .dim()
            .ok_or_else(|| Error::validation("features: training split has no embeddings"))?;
        let mut p = FeaturePipeline {
            level,
            embedding_dim,
            resources,
            engineered: None,
        };
        if opts.embedding_only {
            return Ok(p);
        }
        let labels = train.labels().invalid("features")?;
        let toks: Vec<&Vec<String>> = train
            .iter()
            .map(|d| tokens.get(&d.id).unwrap_or(empty_tokens()))
            .collect();
        let vocab = build_ngram_vocab(toks.iter().map(|t| t.as_slice()).zip(labels), opts.k_per_class)
            .invalid("features")?;
        let res = p.resources.resources();
        let maps: Vec<BTreeMap<String, f64>> = train
            .iter()
            .zip(&toks)
            .map(|(d, t)| extract_features(d, t, &res, &vocab, &opts.families))
            .collect();
        let all: Vec<String> = maps.first().map(|m| m.keys().cloned().collect()).unwrap_or_default();
        if all.is_empty() {
            return Ok(p);
        }
        let rows: Vec<Vec<f64>> = maps.iter().map(|m| all.iter().map(|n| m[n]).collect()).collect();
        let full = standardize_fit(&Matrix::from_rows(&rows).failed("features")?).failed("features")?;
        let keep: Vec<usize> = (0..all.len()).filter(|&j| full.std[j] > 0.0).collect();
        if keep.is_empty() {
            return Ok(p);
        }
        p.engineered = Some(Engineered {
            config: opts.families.clone(),
            vocab,
            names: keep.iter().map(|&j| all[j].clone()).collect(),
            scaler: Scaler {
                mean: keep.iter().map(|&j| full.mean[j]).collect(),
                std: keep.iter().map(|&j| full.std[j]).collect(),
            },
        });
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.embedding_dim + self.engineered.as_ref().map_or(0, |e| e.names.len())
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.embedding_dim).map(|i| format!("emb_{i}")).collect();
        if let Some(e) = &self.engineered {
            names.extend(e.names.iter().cloned());
        }
        names
    }

    pub fn tokenize(&self, doc: &Document) -> Vec<String> {
        tokens_of(doc, self.level, &self.resources.resources())
    }

    /// One row per document: embedding, then the scaled engineered columns.
    /// `tokens` maps ids to preprocessed tokens; absent ids are tokenized here.
    pub fn transform(&self, docs: &Dataset, tokens: &BTreeMap<String, Vec<String>>) -> Result<Matrix> {
        let res = self.resources.resources();
        let mut data = Vec::with_capacity(docs.len() * self.dim());
        for d in docs {
            let emb = d
                .embedding
                .as_ref()
                .ok_or_else(|| Error::validation(format!("record `{}` has no embedding", d.id)))?;
            if emb.len() != self.embedding_dim {
                return Err(Error::validation(format!(
                    "record `{}`: embedding has {} components, the model expects {}",
                    d.id,
                    emb.len(),
                    self.embedding_dim
                )));
            }
            data.extend_from_slice(emb);
            if let Some(e) = &self.engineered {
                let owned;
                let toks = match tokens.get(&d.id) {
                    Some(t) => t,
                    None => {
                        owned = tokens_of(d, self.level, &res);
                        &owned
                    }
                };
                let map = extract_features(d, toks, &res, &e.vocab, &e.config);
                let mut row = e
                    .names
                    .iter()
                    .map(|n| {
                        map.get(n)
                            .copied()
                            .ok_or_else(|| Error::validation(format!("feature `{n}` missing for `{}`", d.id)))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                e.scaler.apply_row(&mut row);
                data.extend(row);
            }
        }
        Matrix::new(docs.len(), self.dim(), data).failed("features")
    }
}
