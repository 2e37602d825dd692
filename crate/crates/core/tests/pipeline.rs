use std::collections::BTreeSet;

use negcascade_core::cascade::{predict_cascade, train_cascade};
use negcascade_core::classifiers::{train, ModelKind, ModelSpec};
use negcascade_core::dataset::{stratified_split, synth_generate, SynthSpec, NEGATIVE, POSITIVE};
use negcascade_core::metrics::evaluate;
use negcascade_core::resample::{ResampleConfig, Strategy};
use negcascade_core::splitcraft::{assign_axis, axis_embeddings, build_nd1, build_nd2, PartitionTag, ThresholdConfig};

#[test]
fn relabel_train_and_combine() {
    let ds = synth_generate(&SynthSpec::overlap_benchmark(1500, 0.25), 2).unwrap();
    let sp = stratified_split(&ds, 0.85, 2).unwrap();
    let axes = axis_embeddings(&sp.train).unwrap();
    let part = assign_axis(&sp.train, &axes, ThresholdConfig { t: 0.0 }).unwrap();

    // Derived label sets: ND1 = every training record, p0 -> 0 and p2/n -> 1;
    // ND2 = p2 -> 0 and n -> 1.
    let nd1 = build_nd1(&part, &sp.train).unwrap();
    let nd2 = build_nd2(&part, &sp.train).unwrap();
    assert_eq!(nd1.len(), sp.train.len());
    assert_eq!(nd2.len(), part.p2.len() + part.n.len());
    for d in &nd1 {
        let want = match part.tag_of(&d.id).unwrap() {
            PartitionTag::P0 => POSITIVE,
            PartitionTag::P2 | PartitionTag::N => NEGATIVE,
        };
        assert_eq!(d.label, Some(want), "{}", d.id);
    }
    for d in &nd2 {
        let want = if part.n.contains(&d.id) { NEGATIVE } else { POSITIVE };
        assert_eq!(d.label, Some(want), "{}", d.id);
    }
    // Gold negatives are never relabeled and never enter p0 or p2.
    let gold_neg: BTreeSet<String> = sp.train.iter().filter(|d| d.label == Some(NEGATIVE)).map(|d| d.id.clone()).collect();
    assert_eq!(part.n, gold_neg);

    let x = sp.train.embedding_matrix().unwrap();
    let xt = sp.test.embedding_matrix().unwrap();
    let yt = sp.test.labels().unwrap();
    let spec = ModelSpec::new(ModelKind::Lr);
    let smote = ResampleConfig::with_strategy(Strategy::Smote);
    let c = train_cascade(&spec, &spec, &x, &sp.train, &part, &ResampleConfig::default(), &smote).unwrap();
    let out = c.run(&xt).unwrap();
    for i in 0..xt.rows() {
        // Final = A and B; B only runs where A said 1.
        assert_eq!(out.stage_b[i].is_some(), out.stage_a[i] == 1);
        assert_eq!(out.labels[i], u8::from(out.stage_a[i] == 1 && out.stage_b[i] == Some(1)));
    }
    assert_eq!(predict_cascade(&c, &xt).unwrap(), out.labels);
    assert_eq!(c.provenance.resampled_a.synthesized, 0);

    let cascade = evaluate(&yt, &out.labels, "cascade").unwrap();
    let single = train(&spec, &x, &sp.train.labels().unwrap()).unwrap();
    let base = evaluate(&yt, &single.predict(&xt).unwrap(), "single").unwrap();
    assert!(cascade.f1_macro > 0.6 && base.f1_macro > 0.6, "{} {}", cascade.f1_macro, base.f1_macro);
}

#[test]
fn raising_the_threshold_moves_positives_back_to_p0() {
    let ds = synth_generate(&SynthSpec::overlap_benchmark(800, 0.4), 5).unwrap();
    let sp = stratified_split(&ds, 0.85, 5).unwrap();
    let axes = axis_embeddings(&sp.train).unwrap();
    let mut prev: Option<BTreeSet<String>> = None;
    for t in [-0.5, -0.1, 0.0, 0.03, 0.05, 0.2, 1.0, 2.5] {
        let p = assign_axis(&sp.train, &axes, ThresholdConfig { t }).unwrap();
        if let Some(prev) = &prev {
            assert!(p.p2.is_subset(prev), "t={t}");
        }
        prev = Some(p.p2);
    }
    // cosine differences lie in [-2, 2], so t = 2.5 empties p2.
    assert!(prev.unwrap().is_empty());
}
