//! PCA scatter export: a CSV of 2-D coordinates and a self-contained SVG.

use std::fmt::Write as _;
use std::path::Path;

use negcascade_core::dataset::{Dataset, Document};
use negcascade_core::reduce::{pca_fit, pca_transform, PcaModel};

use crate::error::{Context, Result};
use crate::io;

#[derive(Clone, Debug, PartialEq)]
pub struct ScatterPoint {
    pub id: String,
    pub pc1: f64,
    pub pc2: f64,
    pub gold_label: Option<u8>,
    pub tag: String,
}

/// Projects the embedded documents of `ds` onto their first two principal
/// components. `tag` labels each point (partition, cluster, ...).
pub fn scatter_points(ds: &Dataset, tag: impl Fn(&Document) -> String) -> Result<(Vec<ScatterPoint>, PcaModel)> {
    let x = ds.embedding_matrix().invalid("plot")?;
    let k = 2.min(x.cols());
    let model = pca_fit(&x, k).invalid("plot")?;
    let z = pca_transform(&model, &x).failed("plot")?;
    let points = ds
        .iter()
        .zip(z.iter_rows())
        .map(|(d, r)| ScatterPoint {
            id: d.id.clone(),
            pc1: r[0],
            pc2: r.get(1).copied().unwrap_or(0.0),
            gold_label: d.label,
            tag: tag(d),
        })
        .collect();
    Ok((points, model))
}

pub fn write_scatter_csv(path: &Path, points: &[ScatterPoint]) -> Result<()> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.id.clone(),
                p.pc1.to_string(),
                p.pc2.to_string(),
                p.gold_label.map(|l| l.to_string()).unwrap_or_default(),
                p.tag.clone(),
            ]
        })
        .collect();
    io::write_csv(path, &["id", "pc1", "pc2", "gold_label", "tag"], &rows)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Positives and negatives in two colors, unlabeled points in gray.
pub fn render_svg(points: &[ScatterPoint], model: &PcaModel, positive: &str, negative: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const M: f64 = 48.0;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p.pc1);
        x1 = x1.max(p.pc1);
        y0 = y0.min(p.pc2);
        y1 = y1.max(p.pc2);
    }
    let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
    let (sx, sy) = (span(x0, x1), span(y0, y1));
    let px = |x: f64| M + (x - x0) / sx * (W - 2.0 * M);
    let py = |y: f64| H - M - (y - y0) / sy * (H - 2.0 * M);
    let pct = |i: usize| model.explained.get(i).map_or(0.0, |e| e * 100.0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<rect x=\"{M}\" y=\"{M}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        W - 2.0 * M,
        H - 2.0 * M
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">PC1 ({:.1}%)</text>",
        W / 2.0,
        H - 12.0,
        pct(0)
    );
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 {})\">PC2 ({:.1}%)</text>",
        H / 2.0,
        H / 2.0,
        pct(1)
    );
    for p in points {
        let color = match p.gold_label {
            Some(1) => negative,
            Some(_) => positive,
            None => "gray",
        };
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{}\" fill-opacity=\"0.6\"><title>{} {}</title></circle>",
            px(p.pc1),
            py(p.pc2),
            escape(color),
            escape(&p.id),
            escape(&p.tag)
        );
    }
    for (i, (name, color)) in [("positive", positive), ("negative", negative)].iter().enumerate() {
        let y = M + 14.0 + 16.0 * i as f64;
        let _ = writeln!(s, "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{}\"/>", W - M - 80.0, y - 4.0, escape(color));
        let _ = writeln!(s, "<text x=\"{}\" y=\"{y}\" font-size=\"12\">{name}</text>", W - M - 70.0);
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_scatter(dir: &Path, points: &[ScatterPoint], model: &PcaModel, positive: &str, negative: &str) -> Result<()> {
    write_scatter_csv(&dir.join("scatter.csv"), points)?;
    let svg = render_svg(points, model, positive, negative);
    let path = dir.join("scatter.svg");
    std::fs::write(&path, svg).map_err(|e| crate::error::Error::io(&path, e))
}
