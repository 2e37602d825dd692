//! Dataset, word-vector and resource file formats.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use negcascade_core::dataset::{Dataset, DatasetBuilder, Document};
use negcascade_core::embed::WordEmbeddings;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Reads line-delimited JSON records. Blank lines are skipped; every other
/// line must be one record, and errors name the 1-based line.
pub fn read_jsonl(input: impl BufRead, name: &str) -> Result<Dataset> {
    let mut b = DatasetBuilder::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::validation(format!("{name}: line {}: {e}", i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .map_err(|e| Error::validation(format!("{name}: line {}: malformed record: {e}", i + 1)))?;
        b.push(doc)
            .map_err(|e| Error::validation(format!("{name}: line {}: {e}", i + 1)))?;
    }
    Ok(b.finish())
}

pub fn load_jsonl(path: &Path) -> Result<Dataset> {
    read_jsonl(open(path)?, &path.display().to_string())
}

pub fn write_jsonl(ds: &Dataset, out: impl Write) -> Result<()> {
    let mut w = BufWriter::new(out);
    for d in ds {
        serde_json::to_writer(&mut w, d).map_err(Error::runtime)?;
        w.write_all(b"\n").map_err(Error::runtime)?;
    }
    w.flush().map_err(Error::runtime)
}

pub fn save_jsonl(ds: &Dataset, path: &Path) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl(ds, f)
}

/// Parses GloVe-style text vectors: a token then its components, separated
/// by spaces. The first line fixes the dimension. A repeated token replaces
/// the earlier vector and produces a warning.
pub fn read_word_vectors(input: impl BufRead, name: &str) -> Result<(WordEmbeddings, Vec<String>)> {
    let mut we: Option<WordEmbeddings> = None;
    let mut warnings = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let at = |msg: String| Error::validation(format!("{name}: line {}: {msg}", i + 1));
        let line = line.map_err(|e| at(e.to_string()))?;
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        let v = parts
            .map(|p| p.parse::<f64>().map_err(|e| at(format!("`{p}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        let we = match &mut we {
            Some(we) => we,
            None => we.insert(WordEmbeddings::new(v.len()).map_err(|e| at(e.to_string()))?),
        };
        if we.insert(token, v).map_err(|e| at(e.to_string()))? {
            warnings.push(format!("{name}: line {}: duplicate token `{token}`, keeping the later vector", i + 1));
        }
    }
    let we = we.ok_or_else(|| Error::validation(format!("{name}: empty lexicon")))?;
    Ok((we, warnings))
}

pub fn load_word_vectors(path: &Path) -> Result<(WordEmbeddings, Vec<String>)> {
    read_word_vectors(open(path)?, &path.display().to_string())
}

/// Non-empty trimmed lines of a one-entry-per-line list.
pub fn load_list(path: &Path) -> Result<Vec<String>> {
    let mut s = String::new();
    open(path)?.read_to_string(&mut s).map_err(|e| Error::io(path, e))?;
    Ok(s.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

/// Two-column tab-separated emoji map.
pub fn load_emoji_map(path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut s = String::new();
    open(path)?.read_to_string(&mut s).map_err(|e| Error::io(path, e))?;
    for (i, line) in s.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line.split_once('\t').ok_or_else(|| {
            Error::validation(format!("{}: line {}: expected `emoji<TAB>text`", path.display(), i + 1))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// `sha256:<hex>` of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_bytes(&bytes))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(7 + 64);
    s.push_str("sha256:");
    for b in digest.iter() {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::runtime)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| Error::validation(format!("{}: {e}", path.display())))
}

/// Writes a CSV with a header row.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::runtime(format!("{}: {e}", path.display())))?;
    let fail = |e: csv::Error| Error::runtime(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Column name to cells, in row order.
pub type Columns = BTreeMap<String, Vec<String>>;

/// Reads a headed CSV; returns the header order and the columns.
pub fn read_csv_columns(path: &Path) -> Result<(Vec<String>, Columns)> {
    let bad = |e: csv::Error| Error::validation(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_reader(open(path)?);
    let header: Vec<String> = r.headers().map_err(bad)?.iter().map(|h| h.trim().to_string()).collect();
    let mut cols: Columns = header.iter().map(|h| (h.clone(), Vec::new())).collect();
    if cols.len() != header.len() {
        return Err(Error::validation(format!("{}: duplicate column names", path.display())));
    }
    for rec in r.records() {
        let rec = rec.map_err(bad)?;
        for (h, v) in header.iter().zip(rec.iter()) {
            cols.get_mut(h).expect("header column").push(v.trim().to_string());
        }
    }
    Ok((header, cols))
}
