//! Record types, stratified splitting and the synthetic overlap generator.
//!
//! Label convention throughout the crate: `1` marks a negative (attacking)
//! document, `0` a positive one.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

/// Label of a negative (attacking) document.
pub const NEGATIVE: u8 = 1;
/// Label of a positive document.
pub const POSITIVE: u8 = 0;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweet_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub like_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub follower_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub following_count: Option<u64>,
    /// Number of tweets on the author's account, when the collector recorded it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tweet_count: Option<u64>,
    /// Epoch seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub account_created_at: Option<i64>,
    /// Epoch seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_at: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_candidate: Option<bool>,
}

impl Meta {
    fn is_empty(&self) -> bool {
        *self == Meta::default()
    }
}

/// One tweet-like record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub features: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Meta::is_empty")]
    pub meta: Meta,
}

impl Document {
    pub fn new(id: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: None,
            label: None,
            embedding: None,
            features: BTreeMap::new(),
            meta: Meta::default(),
        }
    }

    pub fn with_label(mut self, label: u8) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_embedding(mut self, embedding: Vec<f64>) -> Self {
        self.embedding = Some(embedding);
        self
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }
}

/// Incremental validator used by loaders that need to attribute errors to a
/// position in their input.
#[derive(Debug, Default)]
pub struct DatasetBuilder {
    records: Vec<Document>,
    ids: BTreeSet<String>,
    dim: Option<usize>,
}

impl DatasetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, doc: Document) -> Result<()> {
        if let Some(l) = doc.label {
            if l > 1 {
                return Err(Error::NonBinaryLabel(l));
            }
        }
        if let Some(e) = &doc.embedding {
            if e.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("embedding"));
            }
            match self.dim {
                Some(d) if d != e.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: e.len(),
                    })
                }
                None if e.is_empty() => return Err(Error::Empty("embedding")),
                None => self.dim = Some(e.len()),
                _ => {}
            }
        }
        if !self.ids.insert(doc.id.clone()) {
            return Err(Error::DuplicateId(doc.id));
        }
        self.records.push(doc);
        Ok(())
    }

    pub fn finish(self) -> Dataset {
        Dataset {
            records: self.records,
            dim: self.dim,
        }
    }
}

/// An ordered, validated collection of documents. Immutable once built.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    records: Vec<Document>,
    dim: Option<usize>,
}

impl Dataset {
    pub fn new(records: Vec<Document>) -> Result<Self> {
        let mut b = DatasetBuilder::new();
        for r in records {
            b.push(r)?;
        }
        Ok(b.finish())
    }

    pub fn records(&self) -> &[Document] {
        &self.records
    }

    pub fn into_records(self) -> Vec<Document> {
        self.records
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Document> {
        self.records.iter()
    }

    /// Gold labels, failing on the first unlabeled record.
    pub fn labels(&self) -> Result<Vec<u8>> {
        self.records
            .iter()
            .map(|d| {
                d.label.ok_or_else(|| Error::Unlabeled { id: d.id.clone() })
            })
            .collect()
    }

    /// Count of records per label value (unlabeled records are not counted).
    pub fn label_histogram(&self) -> BTreeMap<u8, usize> {
        let mut h = BTreeMap::new();
        for l in self.records.iter().filter_map(|d| d.label) {
            *h.entry(l).or_insert(0) += 1;
        }
        h
    }

    /// Embeddings stacked as rows, failing on the first record without one.
    pub fn embedding_matrix(&self) -> Result<Matrix> {
        let dim = self.dim.unwrap_or(0);
        let mut m = Matrix::empty(dim);
        for d in &self.records {
            let e = d
                .embedding
                .as_ref()
                .ok_or_else(|| Error::MissingEmbedding { id: d.id.clone() })?;
            m.push_row(e)?;
        }
        Ok(m)
    }

    /// Splits into (records with an embedding, ids of records without one).
    pub fn partition_embedded(&self) -> (Dataset, Vec<String>) {
        let mut skipped = Vec::new();
        let mut kept = Vec::new();
        for d in &self.records {
            if d.embedding.is_some() {
                kept.push(d.clone());
            } else {
                skipped.push(d.id.clone());
            }
        }
        (
            Dataset {
                records: kept,
                dim: self.dim,
            },
            skipped,
        )
    }

    /// Records at the given positions, keeping the dataset's dimension.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
            dim: self.dim,
        }
    }

    pub fn filter(&self, mut keep: impl FnMut(&Document) -> bool) -> Dataset {
        Dataset {
            records: self.records.iter().filter(|d| keep(d)).cloned().collect(),
            dim: self.dim,
        }
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Document;
    type IntoIter = core::slice::Iter<'a, Document>;
    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// A train/test split of one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
    pub ratio: f64,
}

pub(crate) fn round_half_up(x: f64) -> usize {
    // The small slack keeps products like 0.85 * 5100 from landing a hair below an integer.
    libm::floor(x + 0.5 + 1e-9).max(0.0) as usize
}

/// Per-class train counts: every class but the largest gets
/// `round_half_up(ratio * size)`, the largest absorbs the remainder of
/// `round_half_up(ratio * n)`.
pub fn stratified_counts(class_sizes: &[usize], ratio: f64) -> Vec<usize> {
    let n: usize = class_sizes.iter().sum();
    let total = round_half_up(ratio * n as f64);
    let majority = class_sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i);
    let mut counts: Vec<usize> = class_sizes
        .iter()
        .map(|&s| round_half_up(ratio * s as f64).min(s))
        .collect();
    if let Some(m) = majority {
        let others: usize = counts
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != m)
            .map(|(_, c)| c)
            .sum();
        counts[m] = total.saturating_sub(others).min(class_sizes[m]);
    }
    counts
}

/// Stratified split on the gold label. Assignment depends only on the record
/// ids and `seed`, not on record order.
pub fn stratified_split(ds: &Dataset, ratio: f64, seed: u64) -> Result<SplitPair> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::param("ratio", format!("{ratio} is outside (0, 1]")));
    }
    let labels = ds.labels()?;
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let counts = stratified_counts(&[by_class[0].len(), by_class[1].len()], ratio);
    let mut in_train = alloc::vec![false; ds.len()];
    for (class, members) in by_class.iter_mut().enumerate() {
        members.sort_by(|&a, &b| ds.records[a].id.cmp(&ds.records[b].id));
        let mut g = rng::seeded(seed, class as u64);
        members.shuffle(&mut g);
        for &i in &members[..counts[class]] {
            in_train[i] = true;
        }
    }
    let (train_idx, test_idx): (Vec<usize>, Vec<usize>) =
        (0..ds.len()).partition(|&i| in_train[i]);
    Ok(SplitPair {
        train: ds.subset(&train_idx),
        test: ds.subset(&test_idx),
        seed,
        ratio,
    })
}

/// One isotropic Gaussian component of the synthetic generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub mean: Vec<f64>,
    pub scale: f64,
}

/// Three-component geometry: clean positives, positives that sit near the
/// negatives, and negatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub dim: usize,
    pub n_pos_clean: usize,
    pub n_pos_overlap: usize,
    pub n_neg: usize,
    pub clean: Component,
    pub overlap: Component,
    pub negative: Component,
}

/// Id prefixes of the generated components.
pub const SYNTH_CLEAN_PREFIX: &str = "pos-clean-";
pub const SYNTH_OVERLAP_PREFIX: &str = "pos-overlap-";
pub const SYNTH_NEGATIVE_PREFIX: &str = "neg-";

impl SynthSpec {
    /// Symmetric three-blob layout along the first two axes: clean positives
    /// around `+e0`, negatives around `+e1`, and overlap positives between
    /// the negatives and the origin-side of the positive blob.
    pub fn simple(dim: usize, counts: (usize, usize, usize), separation: f64, scale: f64) -> Self {
        let axis = |k: usize, v: f64| {
            let mut m = alloc::vec![0.0; dim];
            if k < dim {
                m[k] = v;
            }
            m
        };
        let mut overlap = axis(1, separation * 0.9);
        if dim > 0 {
            overlap[0] = separation * 0.1;
        }
        SynthSpec {
            dim,
            n_pos_clean: counts.0,
            n_pos_overlap: counts.1,
            n_neg: counts.2,
            clean: Component {
                mean: axis(0, separation),
                scale,
            },
            overlap: Component {
                mean: overlap,
                scale,
            },
            negative: Component {
                mean: axis(1, separation),
                scale,
            },
        }
    }

    /// The fixed overlap benchmark used by the harness and the acceptance
    /// suite: 28% negatives, `overlap_fraction` of the positives drawn from a
    /// tight component inside the negative cloud, 32 dimensions.
    pub fn overlap_benchmark(n: usize, overlap_fraction: f64) -> Self {
        const DIM: usize = 32;
        let n_neg = round_half_up(n as f64 * 0.28);
        let n_pos = n - n_neg;
        let n_pos_overlap = round_half_up(n_pos as f64 * overlap_fraction).min(n_pos);
        let mut clean = alloc::vec![0.4; DIM];
        let mut negative = alloc::vec![0.4; DIM];
        clean[0] = 3.0;
        negative[1] = 3.0;
        let mut overlap = negative.clone();
        overlap[2] += 0.6;
        SynthSpec {
            dim: DIM,
            n_pos_clean: n_pos - n_pos_overlap,
            n_pos_overlap,
            n_neg,
            clean: Component {
                mean: clean,
                scale: 1.5,
            },
            overlap: Component {
                mean: overlap,
                scale: 0.6,
            },
            negative: Component {
                mean: negative,
                scale: 1.5,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        if self.n_pos_clean + self.n_pos_overlap == 0 {
            return Err(Error::param("n_pos", "at least one positive is required"));
        }
        if self.n_neg == 0 {
            return Err(Error::param("n_neg", "at least one negative is required"));
        }
        for (name, c) in [
            ("clean", &self.clean),
            ("overlap", &self.overlap),
            ("negative", &self.negative),
        ] {
            if !(c.scale > 0.0 && c.scale.is_finite()) {
                return Err(Error::param("scale", format!("{name} scale must be positive")));
            }
            if c.mean.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: c.mean.len(),
                });
            }
        }
        Ok(())
    }
}

/// Draws a labeled dataset from `spec`. Identical `(spec, seed)` pairs give
/// identical datasets.
pub fn synth_generate(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut g = rng::seeded(seed, 0x5EED);
    let mut records = Vec::with_capacity(spec.n_pos_clean + spec.n_pos_overlap + spec.n_neg);
    let groups = [
        (SYNTH_CLEAN_PREFIX, &spec.clean, spec.n_pos_clean, POSITIVE),
        (SYNTH_OVERLAP_PREFIX, &spec.overlap, spec.n_pos_overlap, POSITIVE),
        (SYNTH_NEGATIVE_PREFIX, &spec.negative, spec.n_neg, NEGATIVE),
    ];
    for (prefix, comp, count, label) in groups {
        for i in 0..count {
            let e: Vec<f64> = comp
                .mean
                .iter()
                .map(|m| m + comp.scale * rng::normal(&mut g))
                .collect();
            records.push(
                Document::new(format!("{prefix}{i:05}"))
                    .with_label(label)
                    .with_embedding(e),
            );
        }
    }
    Dataset::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn labeled(n0: usize, n1: usize) -> Dataset {
        let mut recs = Vec::new();
        for i in 0..n0 {
            recs.push(Document::new(format!("a{i}")).with_label(0));
        }
        for i in 0..n1 {
            recs.push(Document::new(format!("b{i}")).with_label(1));
        }
        Dataset::new(recs).unwrap()
    }

    #[test]
    fn split_matches_reported_counts() {
        let ds = labeled(5100 - 1447, 1447);
        let s = stratified_split(&ds, 0.85, 7).unwrap();
        assert_eq!(s.train.len(), 4335);
        assert_eq!(s.test.len(), 765);
        assert_eq!(s.train.label_histogram()[&1], 1230);
        assert_eq!(s.test.label_histogram()[&1], 217);
    }

    #[test]
    fn split_ratio_one_keeps_everything() {
        let ds = labeled(7, 3);
        let s = stratified_split(&ds, 1.0, 1).unwrap();
        assert_eq!(s.train, ds);
        assert!(s.test.is_empty());
    }

    #[test]
    fn split_balanced_twenty() {
        let s = stratified_split(&labeled(10, 10), 0.8, 3).unwrap();
        assert_eq!(s.train.label_histogram(), BTreeMap::from([(0, 8), (1, 8)]));
        assert_eq!(s.test.label_histogram(), BTreeMap::from([(0, 2), (1, 2)]));
    }

    #[test]
    fn split_rejects_unlabeled_and_bad_ratio() {
        let ds = Dataset::new(vec![Document::new("x")]).unwrap();
        assert!(matches!(stratified_split(&ds, 0.5, 0), Err(Error::Unlabeled { .. })));
        assert!(stratified_split(&labeled(2, 2), 0.0, 0).is_err());
        assert!(stratified_split(&labeled(2, 2), 1.5, 0).is_err());
    }

    #[test]
    fn split_ignores_record_order() {
        let ds = labeled(30, 12);
        let mut rev = ds.records().to_vec();
        rev.reverse();
        let a = stratified_split(&ds, 0.7, 11).unwrap();
        let b = stratified_split(&Dataset::new(rev).unwrap(), 0.7, 11).unwrap();
        let ids = |d: &Dataset| d.iter().map(|r| r.id.clone()).collect::<BTreeSet<_>>();
        assert_eq!(ids(&a.train), ids(&b.train));
    }

    #[test]
    fn builder_rejects_dim_mismatch_and_duplicates() {
        let mut b = DatasetBuilder::new();
        b.push(Document::new("a").with_embedding(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(
            b.push(Document::new("b").with_embedding(vec![0.0; 5])),
            Err(Error::DimensionMismatch { expected: 3, found: 5 })
        );
        assert_eq!(
            b.push(Document::new("a")),
            Err(Error::DuplicateId("a".into()))
        );
        assert_eq!(b.push(Document::new("c").with_label(2)), Err(Error::NonBinaryLabel(2)));
    }

    #[test]
    fn synth_counts_and_determinism() {
        let spec = SynthSpec::simple(4, (50, 25, 75), 4.0, 0.5);
        let a = synth_generate(&spec, 9).unwrap();
        assert_eq!(a.label_histogram(), BTreeMap::from([(0, 75), (1, 75)]));
        assert_eq!(a, synth_generate(&spec, 9).unwrap());
        assert_ne!(a, synth_generate(&spec, 10).unwrap());
    }

    #[test]
    fn synth_rejects_bad_specs() {
        let mut spec = SynthSpec::simple(2, (5, 0, 5), 1.0, 1.0);
        spec.negative.scale = 0.0;
        assert!(synth_generate(&spec, 0).is_err());
        let spec = SynthSpec::simple(2, (5, 0, 0), 1.0, 1.0);
        assert!(synth_generate(&spec, 0).is_err());
    }

    #[test]
    fn benchmark_counts() {
        let spec = SynthSpec::overlap_benchmark(4000, 0.25);
        assert_eq!(spec.n_pos_clean + spec.n_pos_overlap + spec.n_neg, 4000);
        assert_eq!(spec.n_neg, 1120);
        assert_eq!(spec.n_pos_overlap, 720);
    }
}
