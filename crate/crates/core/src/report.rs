//! Self-contained HTML or Markdown reports rendered from pipeline CSVs.
//!
//! Figures are inline SVG written here with fixed-precision coordinates, so
//! identical inputs give byte-identical reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Html,
    Markdown,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("html") | Some("htm") => Ok(Format::Html),
            Some("md") | Some("markdown") => Ok(Format::Markdown),
            _ => Err(Error::Config(format!("report path {} must end in .html or .md", path.display()))),
        }
    }
}

/// A parsed CSV file: header plus string rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Sheet {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Sheet {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Sheet { header, rows })
    }

    pub fn col(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("column `{name}` missing")))
    }

    fn num(&self, row: usize, col: usize) -> f64 {
        self.rows[row][col].parse().unwrap_or(f64::NAN)
    }
}

/// Fixed-precision number formatting for tables and coordinates.
fn f4(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "NaN".into()
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const W: f64 = 320.0;
const H: f64 = 240.0;
const PAD_L: f64 = 52.0;
const PAD_R: f64 = 12.0;
const PAD_T: f64 = 24.0;
const PAD_B: f64 = 40.0;

struct Plot {
    svg: String,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

impl Plot {
    fn new(title: &str, xlabel: &str, ylabel: &str, (x0, x1): (f64, f64), (y0, y1): (f64, f64)) -> Self {
        let mut svg = String::new();
        let _ = write!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="10">"#
        );
        let _ = write!(svg, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
        let _ = write!(svg, r#"<text x="{}" y="14" text-anchor="middle" font-size="11">{}</text>"#, W / 2.0, esc(title));
        let mut p = Plot { svg, x0, x1, y0, y1 };
        let (l, r, t, b) = (PAD_L, W - PAD_R, PAD_T, H - PAD_B);
        let _ = write!(p.svg, r##"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="#444"/>"##, r - l, b - t);
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let (px, py) = (p.sx(fx), p.sy(fy));
            let _ = write!(p.svg, r##"<line x1="{0}" y1="{b}" x2="{0}" y2="{1}" stroke="#444"/>"##, f4(px), b + 3.0);
            let _ = write!(p.svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, f4(px), b + 13.0, tick(fx));
            let _ = write!(p.svg, r##"<line x1="{0}" y1="{1}" x2="{l}" y2="{1}" stroke="#444"/>"##, l - 3.0, f4(py));
            let _ = write!(p.svg, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, l - 5.0, f4(py + 3.0), tick(fy));
        }
        let _ = write!(p.svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, H - 8.0, esc(xlabel));
        let _ = write!(
            p.svg,
            r#"<text x="12" y="{0}" text-anchor="middle" transform="rotate(-90 12 {0})">{1}</text>"#,
            (t + b) / 2.0,
            esc(ylabel)
        );
        p
    }

    fn sx(&self, x: f64) -> f64 {
        PAD_L + (x - self.x0) / (self.x1 - self.x0) * (W - PAD_L - PAD_R)
    }

    fn sy(&self, y: f64) -> f64 {
        H - PAD_B - (y - self.y0) / (self.y1 - self.y0) * (H - PAD_T - PAD_B)
    }

    fn dot(&mut self, x: f64, y: f64, color: &str) {
        if x.is_finite() && y.is_finite() {
            let _ = write!(self.svg, r#"<circle cx="{}" cy="{}" r="2" fill="{color}" fill-opacity="0.7"/>"#, f4(self.sx(x)), f4(self.sy(y)));
        }
    }

    fn polyline(&mut self, pts: &[(f64, f64)], color: &str, dash: bool) {
        let coords: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{},{}", f4(self.sx(x)), f4(self.sy(y))))
            .collect();
        let dash = if dash { r#" stroke-dasharray="4 3""# } else { "" };
        let _ = write!(self.svg, r#"<polyline points="{}" fill="none" stroke="{color}"{dash}/>"#, coords.join(" "));
    }

    fn band(&mut self, lower: &[(f64, f64)], upper: &[(f64, f64)], color: &str) {
        let coords: Vec<String> = lower
            .iter()
            .chain(upper.iter().rev())
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{},{}", f4(self.sx(x)), f4(self.sy(y))))
            .collect();
        let _ = write!(self.svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, coords.join(" "));
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>");
        self.svg
    }
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

/// Blue-to-red ramp for t in [0, 1].
fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    let r = (40.0 + 200.0 * t).round() as u8;
    let b = (240.0 - 200.0 * t).round() as u8;
    format!("#{r:02x}40{b:02x}")
}

fn scatter_panel(target: &str, obs: &[f64], pred: &[f64]) -> String {
    let range = span(obs.iter().chain(pred).copied());
    let mut p = Plot::new(target, "simulated", "predicted", range, range);
    p.polyline(&[(range.0, range.0), (range.1, range.1)], "#888", true);
    for (o, q) in obs.iter().zip(pred) {
        p.dot(*o, *q, "#1f77b4");
    }
    p.finish()
}

fn bar_panel(target: &str, bars: &[(String, f64)]) -> String {
    let n = bars.len().max(1) as f64;
    let max = bars.iter().map(|b| b.1).fold(0.0f64, f64::max).max(1e-300);
    let mut svg = String::new();
    let h = 30.0 + 18.0 * n;
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{h}" viewBox="0 0 {W} {h}" font-family="sans-serif" font-size="10">"#
    );
    let _ = write!(svg, r#"<text x="{}" y="14" text-anchor="middle" font-size="11">mean |SHAP| for {}</text>"#, W / 2.0, esc(target));
    for (i, (f, v)) in bars.iter().enumerate() {
        let y = 24.0 + 18.0 * i as f64;
        let len = v / max * (W - 120.0);
        let _ = write!(svg, r#"<text x="56" y="{}" text-anchor="end">{}</text>"#, y + 11.0, esc(f));
        let _ = write!(svg, r##"<rect x="60" y="{y}" width="{}" height="14" fill="#1f77b4"/>"##, f4(len));
        let _ = write!(svg, r#"<text x="{}" y="{}">{}</text>"#, f4(64.0 + len), y + 11.0, f4(*v));
    }
    svg.push_str("</svg>");
    svg
}

fn summary_panel(target: &str, features: &[(String, Vec<(f64, f64)>)]) -> String {
    let n = features.len().max(1);
    let (x0, x1) = span(features.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)));
    let h = 40.0 + 22.0 * n as f64;
    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{h}" viewBox="0 0 {W} {h}" font-family="sans-serif" font-size="10">"#
    );
    let _ = write!(svg, r#"<text x="{}" y="14" text-anchor="middle" font-size="11">SHAP summary for {}</text>"#, W / 2.0, esc(target));
    let sx = |x: f64| 60.0 + (x - x0) / (x1 - x0) * (W - 72.0);
    let _ = write!(svg, r##"<line x1="{0}" y1="20" x2="{0}" y2="{1}" stroke="#888"/>"##, f4(sx(0.0)), h - 14.0);
    for (i, (f, pts)) in features.iter().enumerate() {
        let yc = 30.0 + 22.0 * i as f64;
        let (v0, v1) = span(pts.iter().map(|p| p.1));
        let _ = write!(svg, r#"<text x="56" y="{}" text-anchor="end">{}</text>"#, yc + 3.0, esc(f));
        for (k, (phi, v)) in pts.iter().enumerate() {
            if !phi.is_finite() {
                continue;
            }
            let jitter = ((k * 7919) % 17) as f64 / 16.0 * 12.0 - 6.0;
            let _ = write!(
                svg,
                r#"<circle cx="{}" cy="{}" r="1.6" fill="{}"/>"#,
                f4(sx(*phi)),
                f4(yc + jitter),
                ramp((v - v0) / (v1 - v0))
            );
        }
    }
    let _ = write!(svg, r#"<text x="{}" y="{}" text-anchor="middle">SHAP value (colour: feature value, low blue, high red)</text>"#, W / 2.0, h - 3.0);
    svg.push_str("</svg>");
    svg
}

fn waterfall_panel(title: &str, steps: &[(String, f64, f64)]) -> String {
    // steps: (label, contribution, cumulative); first is base, last is prediction.
    let n = steps.len().max(1) as f64;
    let (x0, x1) = span(steps.iter().map(|s| s.2).chain(steps.iter().map(|s| s.2 - s.1)));
    let h = 40.0 + 18.0 * n;
    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{h}" viewBox="0 0 {W} {h}" font-family="sans-serif" font-size="10">"#
    );
    let _ = write!(svg, r#"<text x="{}" y="14" text-anchor="middle" font-size="11">{}</text>"#, W / 2.0, esc(title));
    let sx = |x: f64| 70.0 + (x - x0) / (x1 - x0) * (W - 82.0);
    let last = steps.len().saturating_sub(1);
    for (i, (label, c, cum)) in steps.iter().enumerate() {
        let y = 24.0 + 18.0 * i as f64;
        let _ = write!(svg, r#"<text x="66" y="{}" text-anchor="end">{}</text>"#, y + 11.0, esc(label));
        if i == 0 || i == last {
            let _ = write!(svg, r##"<line x1="{0}" y1="{y}" x2="{0}" y2="{1}" stroke="#444" stroke-width="2"/>"##, f4(sx(*cum)), y + 14.0);
            let _ = write!(svg, r#"<text x="{}" y="{}">{}</text>"#, f4(sx(*cum) + 4.0), y + 11.0, f4(*cum));
            continue;
        }
        let (a, b) = (sx(cum - c), sx(*cum));
        let color = if *c >= 0.0 { "#d62728" } else { "#1f77b4" };
        let _ = write!(svg, r#"<rect x="{}" y="{y}" width="{}" height="14" fill="{color}"/>"#, f4(a.min(b)), f4((a - b).abs().max(0.5)));
    }
    svg.push_str("</svg>");
    svg
}

/// Report sources found in the input directory.
pub const SOURCES: [&str; 7] = [
    "eval_kfold.csv",
    "eval_validation.csv",
    "predictions.csv",
    "learning_curve.csv",
    "bar.csv",
    "summary.csv",
    "dependence.csv",
];

struct Builder {
    format: Format,
    out: String,
    missing: Vec<String>,
}

impl Builder {
    fn heading(&mut self, text: &str) {
        match self.format {
            Format::Html => {
                let _ = writeln!(self.out, "<h2>{}</h2>", esc(text));
            }
            Format::Markdown => {
                let _ = writeln!(self.out, "\n## {text}\n");
            }
        }
    }

    fn para(&mut self, text: &str) {
        match self.format {
            Format::Html => {
                let _ = writeln!(self.out, "<p>{}</p>", esc(text));
            }
            Format::Markdown => {
                let _ = writeln!(self.out, "{text}\n");
            }
        }
    }

    fn missing(&mut self, what: &str) {
        self.missing.push(what.to_string());
        self.para(&format!("MISSING: {what} not found; section skipped."));
    }

    fn table(&mut self, sheet: &Sheet) {
        let cell = |s: &str| s.parse::<f64>().map(f4).unwrap_or_else(|_| s.to_string());
        match self.format {
            Format::Html => {
                self.out.push_str("<table>\n<tr>");
                for h in &sheet.header {
                    let _ = write!(self.out, "<th>{}</th>", esc(h));
                }
                self.out.push_str("</tr>\n");
                for r in &sheet.rows {
                    self.out.push_str("<tr>");
                    for c in r {
                        let _ = write!(self.out, "<td>{}</td>", esc(&cell(c)));
                    }
                    self.out.push_str("</tr>\n");
                }
                self.out.push_str("</table>\n");
            }
            Format::Markdown => {
                let _ = writeln!(self.out, "| {} |", sheet.header.join(" | "));
                let _ = writeln!(self.out, "|{}", "---|".repeat(sheet.header.len()));
                for r in &sheet.rows {
                    let cells: Vec<String> = r.iter().map(|c| cell(c)).collect();
                    let _ = writeln!(self.out, "| {} |", cells.join(" | "));
                }
                self.out.push('\n');
            }
        }
    }

    fn figures(&mut self, svgs: &[String]) {
        self.out.push_str("<div>\n");
        for s in svgs {
            self.out.push_str(s);
            self.out.push('\n');
        }
        self.out.push_str("</div>\n\n");
    }
}

fn load(dir: &Path, name: &str) -> Option<Result<Sheet>> {
    let p = dir.join(name);
    p.is_file().then(|| Sheet::read(&p))
}

fn group_by<'a>(sheet: &'a Sheet, key: usize) -> BTreeMap<&'a str, Vec<usize>> {
    let mut m: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in sheet.rows.iter().enumerate() {
        m.entry(r[key].as_str()).or_default().push(i);
    }
    m
}

/// Row order of first appearance for a key column.
fn ordered_keys(sheet: &Sheet, key: usize) -> Vec<String> {
    let mut keys: Vec<String> = Vec::new();
    for r in &sheet.rows {
        if !keys.contains(&r[key]) {
            keys.push(r[key].clone());
        }
    }
    keys
}

fn predictions_section(b: &mut Builder, s: &Sheet) -> Result<()> {
    let (t, o, p) = (s.col("target")?, s.col("observed")?, s.col("predicted")?);
    let mut panels = Vec::new();
    for target in ordered_keys(s, t) {
        let rows: Vec<usize> = (0..s.rows.len()).filter(|&i| s.rows[i][t] == target).collect();
        let obs: Vec<f64> = rows.iter().map(|&i| s.num(i, o)).collect();
        let pred: Vec<f64> = rows.iter().map(|&i| s.num(i, p)).collect();
        panels.push(scatter_panel(&target, &obs, &pred));
    }
    b.figures(&panels);
    Ok(())
}

fn curve_section(b: &mut Builder, s: &Sheet) -> Result<()> {
    let cols = ["size", "train_r2_mean", "train_r2_std", "cv_r2_mean", "cv_r2_std", "plateau"].map(|c| s.col(c));
    let [size, tm, ts, cm, cs, plateau] = cols;
    let (size, tm, ts, cm, cs, plateau) = (size?, tm?, ts?, cm?, cs?, plateau?);
    let n = s.rows.len();
    let get = |c: usize| -> Vec<(f64, f64)> { (0..n).map(|i| (s.num(i, size), s.num(i, c))).collect() };
    let (train, train_sd, cv, cv_sd) = (get(tm), get(ts), get(cm), get(cs));
    let lo = |m: &[(f64, f64)], sd: &[(f64, f64)]| m.iter().zip(sd).map(|(a, b)| (a.0, a.1 - b.1)).collect::<Vec<_>>();
    let hi = |m: &[(f64, f64)], sd: &[(f64, f64)]| m.iter().zip(sd).map(|(a, b)| (a.0, a.1 + b.1)).collect::<Vec<_>>();
    let (tl, th, cl, ch) = (lo(&train, &train_sd), hi(&train, &train_sd), lo(&cv, &cv_sd), hi(&cv, &cv_sd));
    let xr = span(train.iter().map(|p| p.0));
    let yr = span(tl.iter().chain(&th).chain(&cl).chain(&ch).map(|p| p.1));
    let mut p = Plot::new("learning curve (R²)", "training size", "R²", xr, yr);
    p.band(&tl, &th, "#d62728");
    p.band(&cl, &ch, "#2ca02c");
    p.polyline(&train, "#d62728", false);
    p.polyline(&cv, "#2ca02c", false);
    for pt in &cv {
        p.dot(pt.0, pt.1, "#2ca02c");
    }
    b.figures(&[p.finish()]);
    let onset = (0..n).find(|&i| s.rows[i][plateau] == "true").map(|i| s.rows[i][size].clone());
    b.para(&format!(
        "Red: training score, green: cross-validation score, bands ±1 std. Plateau onset: {}.",
        onset.unwrap_or_else(|| "not detected".into())
    ));
    Ok(())
}

fn bar_section(b: &mut Builder, s: &Sheet) -> Result<()> {
    let (t, f, v) = (s.col("target")?, s.col("feature")?, s.col("mean_abs_phi")?);
    let groups = group_by(s, t);
    let panels: Vec<String> = ordered_keys(s, t)
        .iter()
        .map(|target| {
            let bars: Vec<(String, f64)> = groups[target.as_str()].iter().map(|&i| (s.rows[i][f].clone(), s.num(i, v))).collect();
            bar_panel(target, &bars)
        })
        .collect();
    b.figures(&panels);
    Ok(())
}

fn summary_section(b: &mut Builder, s: &Sheet) -> Result<()> {
    let (t, f, phi, val) = (s.col("target")?, s.col("feature")?, s.col("phi")?, s.col("value")?);
    let mut panels = Vec::new();
    for target in ordered_keys(s, t) {
        let rows: Vec<usize> = (0..s.rows.len()).filter(|&i| s.rows[i][t] == target).collect();
        let mut features: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for &i in &rows {
            let name = &s.rows[i][f];
            let pt = (s.num(i, phi), s.num(i, val));
            match features.iter_mut().find(|(n, _)| n == name) {
                Some((_, v)) => v.push(pt),
                None => features.push((name.clone(), vec![pt])),
            }
        }
        panels.push(summary_panel(&target, &features));
    }
    b.figures(&panels);
    Ok(())
}

fn dependence_section(b: &mut Builder, s: &Sheet) -> Result<()> {
    let (t, f, v, phi) = (s.col("target")?, s.col("feature")?, s.col("value")?, s.col("phi")?);
    let mut panels = Vec::new();
    for target in ordered_keys(s, t) {
        for feature in ordered_keys(s, f) {
            let pts: Vec<(f64, f64)> = (0..s.rows.len())
                .filter(|&i| s.rows[i][t] == target && s.rows[i][f] == feature)
                .map(|i| (s.num(i, v), s.num(i, phi)))
                .collect();
            if pts.is_empty() {
                continue;
            }
            let mut p = Plot::new(
                &format!("{target}: {feature}"),
                &feature,
                "SHAP value",
                span(pts.iter().map(|q| q.0)),
                span(pts.iter().map(|q| q.1)),
            );
            for (x, y) in pts {
                p.dot(x, y, "#9467bd");
            }
            panels.push(p.finish());
        }
    }
    b.figures(&panels);
    Ok(())
}

/// Waterfall files sorted by name, each rendered per target.
fn waterfall_section(b: &mut Builder, dir: &Path, limit: usize) -> Result<()> {
    let mut files: Vec<PathBuf> = match std::fs::read_dir(dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("waterfall") && n.ends_with(".csv"))
            })
            .collect(),
        Err(_) => Vec::new(),
    };
    files.sort();
    if files.is_empty() {
        b.missing("waterfall CSVs");
        return Ok(());
    }
    let mut panels = Vec::new();
    for path in files.iter().take(limit) {
        let s = Sheet::read(path)?;
        let (t, inst, label, c, cum) = (s.col("target")?, s.col("instance")?, s.col("label")?, s.col("contribution")?, s.col("cumulative")?);
        for target in ordered_keys(&s, t) {
            let rows: Vec<usize> = (0..s.rows.len()).filter(|&i| s.rows[i][t] == target).collect();
            let steps: Vec<(String, f64, f64)> = rows.iter().map(|&i| (s.rows[i][label].clone(), s.num(i, c), s.num(i, cum))).collect();
            let title = format!("instance {}: {}", s.rows[rows[0]][inst], target);
            panels.push(waterfall_panel(&title, &steps));
        }
    }
    b.figures(&panels);
    if files.len() > limit {
        b.para(&format!("{} further waterfall files not rendered.", files.len() - limit));
    }
    Ok(())
}

/// Rendered report text and the list of missing inputs.
pub fn render(dir: &Path, format: Format) -> Result<(String, Vec<String>)> {
    let mut b = Builder {
        format,
        out: String::new(),
        missing: Vec::new(),
    };
    if format == Format::Html {
        b.out.push_str("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>jetsurro report</title>\n<style>body{font-family:sans-serif;max-width:1100px;margin:auto}table{border-collapse:collapse}td,th{border:1px solid #ccc;padding:2px 6px;text-align:right}svg{margin:4px}</style></head><body>\n<h1>Surrogate model report</h1>\n");
    } else {
        b.out.push_str("# Surrogate model report\n");
    }
    let sections: [(&str, &str, fn(&mut Builder, &Sheet) -> Result<()>); 7] = [
        ("Cross-validation scores", "eval_kfold.csv", |b, s| {
            b.table(s);
            Ok(())
        }),
        ("Validation scores", "eval_validation.csv", |b, s| {
            b.table(s);
            Ok(())
        }),
        ("Predicted vs simulated", "predictions.csv", predictions_section),
        ("Learning curve", "learning_curve.csv", curve_section),
        ("Feature importance", "bar.csv", bar_section),
        ("SHAP summary", "summary.csv", summary_section),
        ("SHAP dependence", "dependence.csv", dependence_section),
    ];
    for (title, file, f) in sections {
        b.heading(title);
        match load(dir, file) {
            None => b.missing(file),
            Some(Err(e)) => b.missing(&format!("{file} (unreadable: {e})")),
            Some(Ok(sheet)) => {
                if let Err(e) = f(&mut b, &sheet) {
                    b.missing(&format!("{file} (malformed: {e})"));
                }
            }
        }
    }
    b.heading("Waterfalls");
    waterfall_section(&mut b, dir, 12)?;
    if format == Format::Html {
        b.out.push_str("</body></html>\n");
    }
    Ok((b.out, b.missing))
}
