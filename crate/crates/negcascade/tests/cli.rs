use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use negcascade::io;
use negcascade_core::dataset::{synth_generate, Dataset, SynthSpec};
use negcascade_core::linalg::Matrix;
use negcascade_core::metrics::{Confusion, EvalReport};
use negcascade_core::nbreg::simulate_nb2;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_negcascade"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    /// A small benchmark corpus on disk plus a config pointing at it.
    fn new(extra: &str) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let ds = synth_generate(&SynthSpec::overlap_benchmark(600, 0.25), 3).unwrap();
        io::save_jsonl(&ds, &dir.path().join("data.jsonl")).unwrap();
        let cfg = format!(
            r#"{{
  "data": {{"path": "data.jsonl"}},
  "features": {{"embedding_only": true}},
  "outputs": {{"scatter": false}}{extra}
}}"#
        );
        fs::write(dir.path().join("config.json"), cfg).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn cmd(&self, sub: &str, out: &str) -> Output {
        run(&[sub, "--config", s(&self.path("config.json")), "--out", s(&self.path(out))])
    }
}

const CASCADE: &str = r#",
  "method": {"axis": {"t": 0.0}},
  "stage_a": {"kind": "lr"},
  "stage_b": {"kind": "gnb"}"#;

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn confusion_of(v: &Value) -> Confusion {
    let c = &v["confusion"];
    let n = |k: &str| c[k].as_u64().unwrap();
    Confusion {
        tp: n("tp"),
        fp: n("fp"),
        fn_: n("fn"),
        tn: n("tn"),
    }
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["score", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["bogus"])), 1);
    assert_eq!(code(&run(&["run"])), 1);
    assert_eq!(code(&run(&["select-uncertain", "--bundle", "b", "--pool", "p", "--n", "many"])), 1);
}

#[test]
fn config_problems_exit_one() {
    let f = Fixture::new(CASCADE);
    assert_eq!(code(&run(&["run", "--config", s(&f.path("missing.json")), "--out", "x"])), 1);

    fs::write(f.path("config.json"), "{ not json").unwrap();
    assert_eq!(code(&f.cmd("run", "o")), 1);

    let both = Fixture::new(
        r#",
  "method": {"axis": {"t": 0.0}, "cluster": {"method": "kmeans", "k": 2}},
  "stage_a": {"kind": "lr"},
  "stage_b": {"kind": "lr"}"#,
    );
    let o = both.cmd("run", "o");
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("exactly one"));

    let unknown = Fixture::new(r#", "stage_a": {"kind": "lr"}, "colour": 3"#);
    assert_eq!(code(&unknown.cmd("run", "o")), 1);

    let no_stage_b = Fixture::new(r#", "method": {"axis": {"t": 0.0}}, "stage_a": {"kind": "lr"}"#);
    assert_eq!(code(&no_stage_b.cmd("run", "o")), 1);

    let bad_kind = Fixture::new(r#", "single": {"kind": "transformer"}"#);
    assert_eq!(code(&bad_kind.cmd("run", "o")), 1);

    // No --out and no output_dir.
    let f = Fixture::new(CASCADE);
    assert_eq!(code(&run(&["run", "--config", s(&f.path("config.json"))])), 1);
}

#[test]
fn malformed_data_exits_one() {
    let f = Fixture::new(CASCADE);
    fs::write(f.path("data.jsonl"), "{\"id\":\"a\",\"label\":1,\"embedding\":[1,2]}\n{\"id\":\"b\",\"label\":7}\n").unwrap();
    let o = f.cmd("run", "o");
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn unwritable_output_exits_two() {
    let f = Fixture::new(CASCADE);
    fs::write(f.path("blocker"), "").unwrap();
    let o = f.cmd("run", "blocker/out");
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn run_report_is_consistent() {
    let f = Fixture::new(CASCADE);
    let o = f.cmd("run", "out");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&f.path("out/report.json"));
    let e = &r["evaluation"];
    let rebuilt = EvalReport::from_confusion(confusion_of(e), e["provenance"].as_str().unwrap()).unwrap();
    assert_eq!(serde_json::to_value(&rebuilt).unwrap(), *e);

    // Split and partition structure.
    let split = &r["split"];
    assert_eq!(split["train"].as_u64().unwrap() + split["test"].as_u64().unwrap(), 600);
    let p = &r["partition"];
    let sum: u64 = ["label_0", "label_1", "label_2"].iter().map(|k| p[k].as_u64().unwrap()).sum();
    assert_eq!(sum, split["train"].as_u64().unwrap());
    assert_eq!(p["label_1"], split["train_negatives"]);
    assert!(r["inputs"]["data"].as_str().unwrap().starts_with("sha256:"));
    assert!(r["config"].get("output_dir").is_none());

    // table4 mirrors the evaluation; partition.csv lists every training record.
    let t4 = fs::read_to_string(f.path("out/table4.csv")).unwrap();
    let row: Vec<&str> = t4.lines().nth(1).unwrap().split(',').collect();
    let header: Vec<&str> = t4.lines().next().unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("f1_macro").parse::<f64>().unwrap(), e["f1_macro"].as_f64().unwrap());
    assert_eq!(col("tp").parse::<u64>().unwrap(), e["confusion"]["tp"].as_u64().unwrap());
    let part = fs::read_to_string(f.path("out/partition.csv")).unwrap();
    assert_eq!(part.lines().count() as u64 - 1, split["train"].as_u64().unwrap());
    assert!(f.path("out/bundle.json").is_file());
    assert!(!f.path("out/scatter.svg").exists());
}

#[test]
fn repeated_runs_are_byte_identical_across_directories() {
    let f = Fixture::new(CASCADE);
    assert_eq!(code(&f.cmd("run", "a")), 0);
    assert_eq!(code(&f.cmd("run", "b")), 0);
    for name in ["report.json", "table3.csv", "table4.csv", "partition.csv", "bundle.json"] {
        assert_eq!(fs::read(f.path("a").join(name)).unwrap(), fs::read(f.path("b").join(name)).unwrap(), "{name}");
    }
}

#[test]
fn cluster_method_run() {
    let f = Fixture::new(
        r#",
  "method": {"cluster": {"method": "kmeans", "k": 2, "seed": 4}},
  "stage_a": {"kind": "dtree"},
  "stage_b": {"kind": "knn"}"#,
    );
    let o = f.cmd("run", "out");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&f.path("out/report.json"));
    assert_eq!(r["partition"]["method"], "cluster(kmeans)");
    assert!(r["clustering"].is_object());
}

const GRID: &str = r#",
  "grid": {
    "thresholds": [0.0, 0.05],
    "stage_a": [{"kind": "lr"}, {"kind": "gnb"}],
    "stage_b": [{"kind": "lr"}, {"kind": "gnb"}],
    "single": [{"kind": "lr"}]
  }"#;

#[test]
fn grid_cardinality_ranking_and_best_bundle() {
    let f = Fixture::new(GRID);
    let o = f.cmd("grid", "g");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let g = json(&f.path("g/grid.json"));
    let rows = g["rows"].as_array().unwrap();
    // 2 thresholds x 2 stage-A kinds x 2 stage-B kinds, plus one baseline.
    assert_eq!(rows.len(), 9);
    let cascades: Vec<&Value> = rows.iter().filter(|r| r["stage_b"] != "").collect();
    assert_eq!(cascades.len(), 8);
    let cells: BTreeSet<u64> = rows.iter().map(|r| r["cell"].as_u64().unwrap()).collect();
    assert_eq!(cells.len(), 9);
    let scores: Vec<f64> = rows.iter().map(|r| r["evaluation"]["f1_macro"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]), "{scores:?}");
    assert_eq!(rows.iter().filter(|r| r["best"] == true).count(), 1);
    assert_eq!(rows[0]["best"], true);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r["rank"].as_u64().unwrap(), i as u64 + 1);
        let rebuilt = EvalReport::from_confusion(confusion_of(&r["evaluation"]), "x").unwrap();
        assert_eq!(rebuilt.f1_macro, r["evaluation"]["f1_macro"].as_f64().unwrap());
    }
    // Every cascade cell with the same threshold sees the same partition.
    assert_eq!(g["partitions"].as_array().unwrap().len(), 2);
    let t4 = fs::read_to_string(f.path("g/table4.csv")).unwrap();
    assert_eq!(t4.lines().count(), 10);
    let best = negcascade::bundle::Bundle::load(&f.path("g/bundle.json")).unwrap();
    assert!(best.predictor.describe().contains(rows[0]["stage_a"].as_str().unwrap()));
}

#[test]
fn grid_without_cells_is_a_validation_error() {
    let f = Fixture::new(r#", "grid": {"stage_a": [{"kind": "lr"}], "stage_b": [{"kind": "lr"}]}"#);
    assert_eq!(code(&f.cmd("grid", "g")), 1);
    let f = Fixture::new(CASCADE);
    assert_eq!(code(&f.cmd("grid", "g")), 1);
}

#[test]
fn grid_two_stage_beats_single_on_the_benchmark() {
    let f = Fixture::new(GRID);
    assert_eq!(code(&f.cmd("grid", "g")), 0);
    let g = json(&f.path("g/grid.json"));
    let rows = g["rows"].as_array().unwrap();
    let best = |single: bool| {
        rows.iter()
            .filter(|r| (r["stage_b"] == "") == single)
            .map(|r| r["evaluation"]["f1_macro"].as_f64().unwrap())
            .fold(f64::NEG_INFINITY, f64::max)
    };
    assert!(best(false) >= best(true), "two-stage {} < single {}", best(false), best(true));
}

fn trained(f: &Fixture) -> PathBuf {
    let o = f.cmd("run", "out");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    f.path("out/bundle.json")
}

/// Records of `data.jsonl` that are not in the training partition.
fn test_split(f: &Fixture) -> Dataset {
    let part = fs::read_to_string(f.path("out/partition.csv")).unwrap();
    let train: BTreeSet<&str> = part.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    let all = io::load_jsonl(&f.path("data.jsonl")).unwrap();
    all.filter(|d| !train.contains(d.id.as_str()))
}

#[test]
fn scoring_the_test_split_reproduces_the_evaluation() {
    let f = Fixture::new(CASCADE);
    let bundle = trained(&f);
    let test = test_split(&f);
    io::save_jsonl(&test, &f.path("pool.jsonl")).unwrap();
    let o = run(&["score", "--bundle", s(&bundle), "--pool", s(&f.path("pool.jsonl")), "--out", s(&f.path("scores.csv"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["total"].as_u64().unwrap() as usize, test.len());

    let (_, cols) = io::read_csv_columns(&f.path("scores.csv")).unwrap();
    let labels: Vec<u8> = cols["label"].iter().map(|l| l.parse().unwrap()).collect();
    let gold = test.labels().unwrap();
    let eval = negcascade_core::metrics::evaluate(&gold, &labels, "x").unwrap();
    let r = json(&f.path("out/report.json"));
    assert_eq!(confusion_of(&r["evaluation"]), eval.confusion);
    // Stage B scores exist exactly for the records stage A routed onward.
    for (sa, sb) in cols["stage_a_score"].iter().zip(&cols["stage_b_score"]) {
        let sa: f64 = sa.parse().unwrap();
        assert_eq!(sb.is_empty(), sa < 0.5, "{sa} {sb:?}");
    }
}

#[test]
fn scoring_an_empty_pool() {
    let f = Fixture::new(CASCADE);
    let bundle = trained(&f);
    fs::write(f.path("empty.jsonl"), "").unwrap();
    let o = run(&["score", "--bundle", s(&bundle), "--pool", s(&f.path("empty.jsonl")), "--out", s(&f.path("scores.csv"))]);
    assert_eq!(code(&o), 0);
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["total"], 0);
    assert_eq!(fs::read_to_string(f.path("scores.csv")).unwrap().lines().count(), 1);
}

#[test]
fn unscorable_records_and_bad_bundles_exit_one() {
    let f = Fixture::new(CASCADE);
    let bundle = trained(&f);
    fs::write(f.path("pool.jsonl"), "{\"id\":\"x\",\"text\":\"no vectors here\"}\n").unwrap();
    let o = run(&["score", "--bundle", s(&bundle), "--pool", s(&f.path("pool.jsonl")), "--out", s(&f.path("s.csv"))]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("`x`"));

    fs::write(f.path("pool.jsonl"), "{\"id\":\"x\",\"embedding\":[1,2]}\n").unwrap();
    let o = run(&["score", "--bundle", s(&bundle), "--pool", s(&f.path("pool.jsonl")), "--out", s(&f.path("s.csv"))]);
    assert_eq!(code(&o), 1);

    let mut b = json(&bundle);
    b["format"] = "something-else".into();
    fs::write(f.path("bad.json"), b.to_string()).unwrap();
    let o = run(&["score", "--bundle", s(&f.path("bad.json")), "--pool", s(&f.path("data.jsonl")), "--out", s(&f.path("s.csv"))]);
    assert_eq!(code(&o), 1);
}

#[test]
fn select_uncertain_lists_distinct_pool_ids() {
    let f = Fixture::new(CASCADE);
    let bundle = trained(&f);
    let pool = s(&f.path("data.jsonl")).to_string();
    let o = run(&["select-uncertain", "--bundle", s(&bundle), "--pool", &pool, "--n", "7"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ids: Vec<String> = String::from_utf8(o.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(ids.len(), 7);
    assert_eq!(ids.iter().collect::<BTreeSet<_>>().len(), 7);
    let all = io::load_jsonl(&f.path("data.jsonl")).unwrap();
    assert!(ids.iter().all(|id| all.iter().any(|d| &d.id == id)));
    let again = run(&["select-uncertain", "--bundle", s(&bundle), "--pool", &pool, "--n", "7"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), ids.join("\n") + "\n");
    assert_eq!(code(&run(&["select-uncertain", "--bundle", s(&bundle), "--pool", &pool, "--n", "100000"])), 1);
}

#[test]
fn single_model_run_and_score() {
    let f = Fixture::new(r#", "single": {"kind": "rf", "seed": 1}, "resample": {"single": {"strategy": "smote"}}"#);
    let bundle = trained(&f);
    let r = json(&f.path("out/report.json"));
    assert_eq!(r["mode"], "single");
    assert!(r["models"][0]["resampled"]["synthesized"].as_u64().unwrap() > 0);
    let o = run(&["score", "--bundle", s(&bundle), "--pool", s(&f.path("data.jsonl")), "--out", s(&f.path("s.csv"))]);
    assert_eq!(code(&o), 0);
    let (_, cols) = io::read_csv_columns(&f.path("s.csv")).unwrap();
    assert!(cols["stage_b_score"].iter().all(String::is_empty));
}

#[test]
fn regress_prints_a_starred_table() {
    let dir = tempfile::tempdir().unwrap();
    let n = 1500;
    let rows: Vec<[f64; 3]> = (0..n)
        .map(|i| [1.0, ((i * 37) % 100) as f64 / 50.0 - 1.0, f64::from(u8::from(i % 3 == 0))])
        .collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let y = simulate_nb2(&x, &[0.5, 0.8, 0.0], 0.5, 2).unwrap();
    let mut csv = String::from("negatives,activity,verified\n");
    for (r, y) in rows.iter().zip(&y) {
        csv.push_str(&format!("{y},{},{}\n", r[1], if r[2] == 1.0 { "true" } else { "false" }));
    }
    let input = dir.path().join("t.csv");
    fs::write(&input, csv).unwrap();
    let out = dir.path().join("coef.csv");
    let o = run(&["regress", "--input", s(&input), "--response", "negatives", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let activity = text.lines().find(|l| l.starts_with("activity")).unwrap();
    assert!(activity.contains("***"), "{text}");
    assert!(text.contains("n = 1500"));
    assert!(text.contains("*: p <= 0.1"));
    let (_, cols) = io::read_csv_columns(&out).unwrap();
    assert_eq!(cols["variable"], ["activity", "verified", "intercept"]);
    let coef: f64 = cols["coef"][0].parse().unwrap();
    assert!((coef - 0.8).abs() < 0.15, "{coef}");

    let o = run(&["regress", "--input", s(&input), "--response", "missing"]);
    assert_eq!(code(&o), 1);
    let o = run(&["regress", "--input", s(&input), "--response", "negatives", "--columns", "activity,nope"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn plot_writes_csv_and_svg() {
    let f = Fixture::new(CASCADE);
    trained(&f);
    let out = f.path("plot");
    let o = run(&[
        "plot",
        "--data",
        s(&f.path("data.jsonl")),
        "--partition",
        s(&f.path("out/partition.csv")),
        "--out",
        s(&out),
        "--positive-color",
        "#800080",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, cols) = io::read_csv_columns(&out.join("scatter.csv")).unwrap();
    assert_eq!(cols["id"].len(), 600);
    let tags: BTreeSet<&str> = cols["tag"].iter().map(String::as_str).collect();
    assert!(tags.contains("p0") && tags.contains("n") && tags.contains("label_1"), "{tags:?}");
    let svg = fs::read_to_string(out.join("scatter.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(svg.contains("#800080"));
}

#[test]
fn prep_and_embed() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    fs::write(
        p("raw.jsonl"),
        concat!(
            "{\"id\":\"a\",\"text\":\"Vote for the candidate today\",\"label\":1}\n",
            "{\"id\":\"b\",\"text\":\"zzz qqq\"}\n",
            "{\"id\":\"c\",\"embedding\":[0.5,0.5]}\n",
        ),
    )
    .unwrap();
    fs::write(p("stop.txt"), "the\nfor\n").unwrap();
    fs::write(p("vec.txt"), "vote 1 0\ncandidate 0 1\ntoday 1 1\n").unwrap();

    let o = run(&["prep", "--input", s(&p("raw.jsonl")), "--output", s(&p("tok.jsonl")), "--stopwords", s(&p("stop.txt"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let first: Value = serde_json::from_str(fs::read_to_string(p("tok.jsonl")).unwrap().lines().next().unwrap()).unwrap();
    let toks: Vec<&str> = first["tokens"].as_array().unwrap().iter().map(|t| t.as_str().unwrap()).collect();
    assert!(toks.contains(&"vote") && !toks.contains(&"the"), "{toks:?}");

    let o = run(&[
        "embed",
        "--input",
        s(&p("raw.jsonl")),
        "--output",
        s(&p("emb.jsonl")),
        "--word-vectors",
        s(&p("vec.txt")),
        "--stopwords",
        s(&p("stop.txt")),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`b`"));
    let ds = io::load_jsonl(&p("emb.jsonl")).unwrap();
    let get = |id: &str| ds.iter().find(|d| d.id == id).unwrap().embedding.clone();
    assert_eq!(get("a"), Some(vec![2.0 / 3.0, 2.0 / 3.0]));
    assert_eq!(get("b"), None);
    assert_eq!(get("c"), Some(vec![0.5, 0.5]));

    fs::write(p("vec.txt"), "vote 1 0\ncandidate 0 1 2\n").unwrap();
    let o = run(&["embed", "--input", s(&p("raw.jsonl")), "--output", s(&p("e2.jsonl")), "--word-vectors", s(&p("vec.txt"))]);
    assert_eq!(code(&o), 1);
}

#[test]
fn synthetic_and_file_sources_agree() {
    // The same corpus given inline and as a file trains the same model.
    let f = Fixture::new(CASCADE);
    trained(&f);
    let cfg = format!(
        r#"{{
  "data": {{"synthetic": {{"geometry": {{"kind": "overlap_benchmark", "n": 600, "overlap_fraction": 0.25}}, "seed": 3}}}},
  "features": {{"embedding_only": true}},
  "outputs": {{"scatter": false}}{CASCADE}
}}"#
    );
    fs::write(f.path("synth.json"), cfg).unwrap();
    let o = run(&["run", "--config", s(&f.path("synth.json")), "--out", s(&f.path("synth"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = json(&f.path("out/report.json"));
    let b = json(&f.path("synth/report.json"));
    assert_eq!(a["evaluation"], b["evaluation"]);
    assert_eq!(a["partition"], b["partition"]);
}
