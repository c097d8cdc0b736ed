//! Deterministic SVG line plots of metric CSVs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VsmlError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PlotLayout {
    /// `step` plus one or more series; a `<name>_std` column draws a band.
    LearningCurve,
    /// A trace CSV: one probability line per class, with label and
    /// prediction markers.
    Introspection,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Parsed numeric CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn parse(csv: &str) -> Result<Self> {
        let mut lines = csv.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| VsmlError::config("CSV has no header"))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| VsmlError::config(format!("CSV row {} is not numeric", i + 1)))?;
            if row.len() != header.len() {
                return Err(VsmlError::config(format!("CSV row {} has {} fields", i + 1, row.len())));
            }
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    fn require(&self, names: &[&str]) -> Result<()> {
        let missing: Vec<&str> = names
            .iter()
            .copied()
            .filter(|n| !self.header.iter().any(|h| h == n))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(VsmlError::config(format!("CSV is missing columns: {}", missing.join(", "))))
        }
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let span = if self.x1 > self.x0 { self.x1 - self.x0 } else { 1.0 };
        MARGIN + (x - self.x0) / span * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        let span = if self.y1 > self.y0 { self.y1 - self.y0 } else { 1.0 };
        HEIGHT - MARGIN - (y - self.y0) / span * (HEIGHT - 2.0 * MARGIN)
    }
}

fn header(out: &mut String, title: &str, f: &Frame, xlabel: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="DejaVu Sans, sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text id="title" x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, WIDTH / 2.0, esc(title));
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(out, r#"<g id="axes" stroke="black" fill="none"><path d="M{l} {t} L{l} {b} L{r} {b}"/></g>"#);
    let _ = writeln!(out, r#"<g id="ticks" text-anchor="middle">"#);
    for k in 0..=4 {
        let fx = f.x0 + (f.x1 - f.x0) * k as f64 / 4.0;
        let fy = f.y0 + (f.y1 - f.y0) * k as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, f.px(fx), b + 15.0, num(fx));
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, l - 5.0, f.py(fy) + 4.0, num(fy));
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r#"<text id="xlabel" x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 12.0, esc(xlabel));
}

fn num(v: f64) -> String {
    if v.abs() >= 1000.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(xs: &[f64], ys: &[f64], f: &Frame) -> String {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn legend(out: &mut String, names: &[String]) {
    let _ = writeln!(out, r#"<g id="legend">"#);
    for (i, n) in names.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let c = COLORS[i % COLORS.len()];
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{c}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            WIDTH - MARGIN - 110.0,
            WIDTH - MARGIN - 90.0,
            WIDTH - MARGIN - 85.0,
            y + 4.0,
            esc(n)
        );
    }
    let _ = writeln!(out, "</g>");
}

/// Render `csv` with the given layout.
pub fn render_plot(csv: &str, layout: PlotLayout, title: &str) -> Result<String> {
    let t = Table::parse(csv)?;
    match layout {
        PlotLayout::LearningCurve => learning_curve(&t, title),
        PlotLayout::Introspection => introspection(&t, title),
    }
}

fn learning_curve(t: &Table, title: &str) -> Result<String> {
    t.require(&["step"])?;
    let xs = t.column("step").unwrap_or_default();
    let series: Vec<&String> = t.header.iter().filter(|h| *h != "step" && !h.ends_with("_std")).collect();
    let mut all = Vec::new();
    for s in &series {
        let ys = t.column(s).unwrap_or_default();
        let sd = t.column(&format!("{s}_std"));
        for (i, &y) in ys.iter().enumerate() {
            let d = sd.as_ref().map_or(0.0, |v| v[i]);
            all.push(y - d);
            all.push(y + d);
        }
    }
    let (x0, x1) = bounds(xs.iter().copied());
    let (y0, y1) = bounds(all.into_iter());
    let f = Frame { x0, x1, y0, y1 };
    let mut out = String::new();
    header(&mut out, title, &f, "step");
    let _ = writeln!(out, r#"<g id="series" fill="none" stroke-width="1.5">"#);
    for (i, s) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let ys = t.column(s).unwrap_or_default();
        if let Some(sd) = t.column(&format!("{s}_std")) {
            let upper: Vec<f64> = ys.iter().zip(&sd).map(|(y, d)| y + d).collect();
            let lower: Vec<f64> = ys.iter().zip(&sd).map(|(y, d)| y - d).collect();
            let mut pts = polyline(&xs, &upper, &f);
            let rx: Vec<f64> = xs.iter().rev().copied().collect();
            let rl: Vec<f64> = lower.iter().rev().copied().collect();
            if !xs.is_empty() {
                pts.push(' ');
                pts.push_str(&polyline(&rx, &rl, &f));
                let _ = writeln!(out, r#"<polygon id="band-{i}" points="{pts}" fill="{c}" fill-opacity="0.2" stroke="none"/>"#);
            }
        }
        let _ = writeln!(out, r#"<polyline id="line-{i}" points="{}" stroke="{c}"/>"#, polyline(&xs, &ys, &f));
    }
    let _ = writeln!(out, "</g>");
    legend(&mut out, &series.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    Ok(out)
}

fn introspection(t: &Table, title: &str) -> Result<String> {
    t.require(&["step", "label", "predicted", "prob_0"])?;
    let xs = t.column("step").unwrap_or_default();
    let classes = t.header.iter().filter(|h| h.starts_with("prob_")).count();
    let (x0, x1) = bounds(xs.iter().copied());
    let f = Frame { x0, x1, y0: 0.0, y1: 1.0 };
    let mut out = String::new();
    header(&mut out, title, &f, "examples seen");
    let _ = writeln!(out, r#"<g id="series" fill="none" stroke-width="1.5">"#);
    let mut names = Vec::new();
    for k in 0..classes {
        let ys = t.column(&format!("prob_{k}")).unwrap_or_default();
        let c = COLORS[k % COLORS.len()];
        let _ = writeln!(out, r#"<polyline id="line-{k}" points="{}" stroke="{c}"/>"#, polyline(&xs, &ys, &f));
        names.push(format!("class {k}"));
    }
    let _ = writeln!(out, "</g>");
    let labels = t.column("label").unwrap_or_default();
    let preds = t.column("predicted").unwrap_or_default();
    let _ = writeln!(out, r#"<g id="markers">"#);
    for ((&x, &l), &p) in xs.iter().zip(&labels).zip(&preds) {
        let c = COLORS[(l as usize) % COLORS.len()];
        let _ = writeln!(out, r#"<rect x="{:.2}" y="{:.2}" width="4" height="4" fill="{c}"/>"#, f.px(x) - 2.0, HEIGHT - MARGIN + 20.0);
        let shape = if l == p { "none" } else { "black" };
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}" stroke="{shape}"/>"#,
            f.px(x),
            HEIGHT - MARGIN + 28.0,
            COLORS[(p as usize) % COLORS.len()]
        );
    }
    let _ = writeln!(out, "</g>");
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    Ok(out)
}
