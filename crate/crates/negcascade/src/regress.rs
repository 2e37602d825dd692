//! Negative binomial driver analysis from a CSV table.

use std::fmt::Write as _;
use std::path::Path;

use negcascade_core::linalg::Matrix;
use negcascade_core::nbreg::{fit_nb2, stars, DesignMatrix, FitOptions, RegressionResult};

use crate::error::{Context, Error, Result};
use crate::io;

#[derive(Clone, Debug, PartialEq)]
pub struct RegressOptions {
    pub response: String,
    /// Covariates in output order; every other column when absent.
    pub columns: Option<Vec<String>>,
    pub intercept: bool,
    pub fit: FitOptions,
}

fn parse_cell(col: &str, row: usize, v: &str) -> Result<f64> {
    match v.to_ascii_lowercase().as_str() {
        "true" => return Ok(1.0),
        "false" => return Ok(0.0),
        _ => {}
    }
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::validation(format!("column `{col}`, row {}: `{v}` is not a finite number", row + 1)))
}

pub fn load_design(path: &Path, opts: &RegressOptions) -> Result<DesignMatrix> {
    let (header, cols) = io::read_csv_columns(path)?;
    let ys = cols
        .get(&opts.response)
        .ok_or_else(|| Error::validation(format!("{}: no response column `{}`", path.display(), opts.response)))?;
    let y = ys
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = parse_cell(&opts.response, i, v)?;
            if x < 0.0 || x.fract() != 0.0 {
                return Err(Error::validation(format!(
                    "response `{}`, row {}: `{v}` is not a non-negative integer count",
                    opts.response,
                    i + 1
                )));
            }
            Ok(x as u64)
        })
        .collect::<Result<Vec<u64>>>()?;
    let names: Vec<String> = match &opts.columns {
        Some(c) => c.clone(),
        None => header.iter().filter(|h| **h != opts.response).cloned().collect(),
    };
    let mut data = Vec::with_capacity(y.len() * names.len());
    let columns = names
        .iter()
        .map(|n| {
            let c = cols
                .get(n)
                .ok_or_else(|| Error::validation(format!("{}: no column `{n}`", path.display())))?;
            c.iter().enumerate().map(|(i, v)| parse_cell(n, i, v)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    for i in 0..y.len() {
        data.extend(columns.iter().map(|c| c[i]));
    }
    let x = Matrix::new(y.len(), names.len(), data).invalid("design")?;
    if opts.intercept {
        DesignMatrix::with_intercept(names, &x, y).invalid("design")
    } else {
        DesignMatrix::new(names, x, y).invalid("design")
    }
}

pub fn regress(path: &Path, opts: &RegressOptions) -> Result<RegressionResult> {
    let d = load_design(path, opts)?;
    fit_nb2(&d, opts.fit).failed("nb2 fit")
}

pub const COEF_HEADER: [&str; 6] = ["variable", "coef", "std_err", "z", "p", "stars"];

pub fn coef_rows(r: &RegressionResult) -> Vec<Vec<String>> {
    r.coefficients
        .iter()
        .map(|c| {
            vec![
                c.name.clone(),
                c.coef.to_string(),
                c.std_err.to_string(),
                c.z.to_string(),
                c.p.to_string(),
                stars(c.p).to_string(),
            ]
        })
        .collect()
}

/// Fixed-width rendering with significance stars on the coefficient.
pub fn coef_text(r: &RegressionResult, n: usize) -> String {
    let w = r.coefficients.iter().map(|c| c.name.len()).max().unwrap_or(8).max(8);
    let mut s = String::new();
    let _ = writeln!(s, "{:<w$}  {:>12}  {:>10}  {:>8}  {:>7}", "variable", "coef", "std err", "z", "p");
    for c in &r.coefficients {
        let coef = format!("{:.4}{}", c.coef, stars(c.p));
        let _ = writeln!(s, "{:<w$}  {:>12}  {:>10.4}  {:>8.3}  {:>7.3}", c.name, coef, c.std_err, c.z, c.p);
    }
    let _ = writeln!(
        s,
        "n = {n}, alpha = {:.4}, log-likelihood = {:.3}, iterations = {}{}",
        r.alpha,
        r.log_likelihood,
        r.iterations,
        if r.converged { "" } else { " (not converged)" }
    );
    s.push_str("*: p <= 0.1, **: p <= 0.05, ***: p <= 0.01\n");
    s
}
