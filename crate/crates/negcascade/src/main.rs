use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use negcascade::bundle::Bundle;
use negcascade::config::{ResourcePaths, RunConfig};
use negcascade::error::{Error, Result};
use negcascade::features::{tokens_of, ResourceLists};
use negcascade::{grid, io, plot, regress, run, score};
use negcascade_core::dataset::Dataset;
use negcascade_core::embed::{doc_embedding, WordEmbeddings};
use negcascade_core::nbreg::FitOptions;
use negcascade_core::textprep::{is_removable, PrepLevel};

#[derive(Parser)]
#[command(name = "negcascade", version, about = "Two-stage campaign-negativity classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Preprocess texts into token lists (JSONL: id, tokens, removable).
    Prep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        text: TextArgs,
    },
    /// Fill missing document embeddings by averaging word vectors.
    Embed {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        word_vectors: PathBuf,
        #[command(flatten)]
        text: TextArgs,
    },
    /// Train and evaluate one configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the config's `grid` section and rank the cells.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the pool ids whose scores are closest to 0.5.
    SelectUncertain {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        word_vectors: Option<PathBuf>,
    },
    /// Label a pool with a trained bundle.
    Score {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        /// Per-record CSV output.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        word_vectors: Option<PathBuf>,
    },
    /// Negative binomial regression on a CSV table.
    Regress {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        response: String,
        /// Comma-separated covariates (default: every other column).
        #[arg(long, value_delimiter = ',')]
        columns: Option<Vec<String>>,
        #[arg(long)]
        no_intercept: bool,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Also write the coefficient table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// PCA scatter (CSV + SVG) of a dataset's embeddings.
    Plot {
        #[arg(long)]
        data: PathBuf,
        /// Partition audit CSV (id, gold_label, partition) used to tag points.
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "purple")]
        positive_color: String,
        #[arg(long, default_value = "red")]
        negative_color: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    L1,
    L2,
    L3,
}

#[derive(Args)]
struct TextArgs {
    #[arg(long, value_enum, default_value = "l3")]
    level: Level,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    emoji_map: Option<PathBuf>,
    #[arg(long)]
    insults: Option<PathBuf>,
    #[arg(long)]
    persons: Option<PathBuf>,
    #[arg(long)]
    orgs: Option<PathBuf>,
}

impl TextArgs {
    fn level(&self) -> PrepLevel {
        match self.level {
            Level::L1 => PrepLevel::L1,
            Level::L2 => PrepLevel::L2,
            Level::L3 => PrepLevel::L3,
        }
    }

    fn resources(&self) -> Result<ResourceLists> {
        let mut cfg = RunConfig::from_json(r#"{"data": {}}"#)?;
        cfg.resources = ResourcePaths {
            stopwords: self.stopwords.clone(),
            emoji_map: self.emoji_map.clone(),
            insults: self.insults.clone(),
            persons: self.persons.clone(),
            orgs: self.orgs.clone(),
        };
        ResourceLists::load(&cfg)
    }
}

fn load_config(path: &Path, out: Option<PathBuf>) -> Result<(RunConfig, PathBuf)> {
    let cfg = RunConfig::load(path)?;
    let dir = match (out, &cfg.output_dir) {
        (Some(o), _) => o,
        (None, Some(d)) => cfg.resolve(d),
        (None, None) => return Err(Error::validation("no output directory: pass --out or set output_dir")),
    };
    Ok((cfg, dir))
}

fn word_vectors(p: Option<&Path>) -> Result<Option<WordEmbeddings>> {
    p.map(|p| {
        let (we, warnings) = io::load_word_vectors(p)?;
        for w in warnings {
            eprintln!("warning: {w}");
        }
        Ok(we)
    })
    .transpose()
}

fn stdout_line(s: &str) -> Result<()> {
    writeln!(std::io::stdout(), "{s}").map_err(Error::runtime)
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Prep { input, output, text } => {
            let ds = io::load_jsonl(&input)?;
            let res = text.resources()?.resources();
            let mut s = String::new();
            for d in &ds {
                let tokens = tokens_of(d, text.level(), &res);
                let line = serde_json::json!({
                    "id": d.id,
                    "removable": d.text.is_some() && is_removable(&tokens),
                    "tokens": tokens,
                });
                s.push_str(&line.to_string());
                s.push('\n');
            }
            std::fs::write(&output, s).map_err(Error::runtime)
        }
        Command::Embed {
            input,
            output,
            word_vectors: wv,
            text,
        } => {
            let ds = io::load_jsonl(&input)?;
            let we = word_vectors(Some(&wv))?.expect("path given");
            let res = text.resources()?.resources();
            let mut missing = 0;
            let mut docs = ds.into_records();
            for d in &mut docs {
                if d.embedding.is_none() {
                    d.embedding = doc_embedding(&tokens_of(d, text.level(), &res), &we);
                    if d.embedding.is_none() {
                        missing += 1;
                        eprintln!("skipped: `{}` has no in-lexicon token", d.id);
                    }
                }
            }
            let ds = Dataset::new(docs).map_err(|e| Error::validation(format!("embed: {e}")))?;
            io::save_jsonl(&ds, &output)?;
            stdout_line(&format!("{} records, {missing} without embedding", ds.len()))
        }
        Command::Run { config, out } => {
            let (cfg, dir) = load_config(&config, out)?;
            let r = run::run(&cfg, &dir)?;
            stdout_line(&format!(
                "{}: f1_macro {:.4} f1_weighted {:.4} -> {}",
                r.evaluation.provenance,
                r.evaluation.f1_macro,
                r.evaluation.f1_weighted,
                dir.display()
            ))
        }
        Command::Grid { config, out } => {
            let (cfg, dir) = load_config(&config, out)?;
            let r = grid::run_grid(&cfg, &dir)?;
            let failed = r.rows.iter().filter(|r| r.error.is_some()).count();
            if let Some(b) = r.rows.iter().find(|r| r.best) {
                let e = b.evaluation.as_ref().expect("best row evaluated");
                stdout_line(&format!(
                    "best: {} {}-{} f1_macro {:.4} ({} cells, {failed} failed) -> {}",
                    b.method,
                    b.stage_a,
                    b.stage_b,
                    e.f1_macro,
                    r.rows.len(),
                    dir.display()
                ))
            } else {
                Err(Error::runtime(format!("all {} grid cells failed", r.rows.len())))
            }
        }
        Command::SelectUncertain {
            bundle,
            pool,
            n,
            word_vectors: wv,
        } => {
            let b = Bundle::load(&bundle)?;
            let pool = io::load_jsonl(&pool)?;
            let we = word_vectors(wv.as_deref())?;
            for id in score::select_uncertain(&b, &pool, n, we.as_ref())? {
                stdout_line(&id)?;
            }
            Ok(())
        }
        Command::Score {
            bundle,
            pool,
            out,
            word_vectors: wv,
        } => {
            let b = Bundle::load(&bundle)?;
            let pool = io::load_jsonl(&pool)?;
            let we = word_vectors(wv.as_deref())?;
            let (rows, summary) = score::score_corpus(&b, &pool, we.as_ref())?;
            score::write_scores(&out, &rows)?;
            stdout_line(&serde_json::to_string(&summary).map_err(Error::runtime)?)
        }
        Command::Regress {
            input,
            response,
            columns,
            no_intercept,
            max_iter,
            tol,
            out,
        } => {
            let opts = regress::RegressOptions {
                response,
                columns,
                intercept: !no_intercept,
                fit: FitOptions { max_iter, tol },
            };
            let d = regress::load_design(&input, &opts)?;
            let r = negcascade_core::nbreg::fit_nb2(&d, opts.fit).map_err(|e| Error::runtime(format!("nb2 fit: {e}")))?;
            if let Some(o) = out {
                io::write_csv(&o, &regress::COEF_HEADER, &regress::coef_rows(&r))?;
            }
            write!(std::io::stdout(), "{}", regress::coef_text(&r, d.y.len())).map_err(Error::runtime)
        }
        Command::Plot {
            data,
            partition,
            out,
            positive_color,
            negative_color,
        } => {
            let ds = io::load_jsonl(&data)?;
            let (embedded, skipped) = ds.partition_embedded();
            if !skipped.is_empty() {
                eprintln!("skipped {} records without embeddings", skipped.len());
            }
            let tags = match &partition {
                Some(p) => {
                    let (_, cols) = io::read_csv_columns(p)?;
                    let (ids, tags) = match (cols.get("id"), cols.get("partition")) {
                        (Some(i), Some(t)) => (i.clone(), t.clone()),
                        _ => return Err(Error::validation(format!("{}: needs id and partition columns", p.display()))),
                    };
                    ids.into_iter().zip(tags).collect()
                }
                None => std::collections::BTreeMap::new(),
            };
            let (points, model) = plot::scatter_points(&embedded, |d| {
                tags.get(&d.id)
                    .cloned()
                    .unwrap_or_else(|| d.label.map_or(String::new(), |l| format!("label_{l}")))
            })?;
            std::fs::create_dir_all(&out).map_err(Error::runtime)?;
            plot::write_scatter(&out, &points, &model, &positive_color, &negative_color)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
