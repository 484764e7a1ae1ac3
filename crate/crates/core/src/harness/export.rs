use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::run::ExperimentResult;
use crate::error::{Error, Result};
use crate::num::Signal;

/// One exported figure: a parameter estimate or a state error component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureId {
    /// `θ̂ᵢ`, 1-based.
    Theta(usize),
    /// `eᵢ = xᵢ − x̂ᵢ`, 1-based.
    Error(usize),
}

impl FigureId {
    /// `theta1, theta2, …, e1, e2, …` for an order-`n` plant.
    pub fn all(n: usize) -> Vec<FigureId> {
        (1..=n)
            .map(FigureId::Theta)
            .chain((1..=n).map(FigureId::Error))
            .collect()
    }

    pub fn name(&self) -> String {
        match self {
            FigureId::Theta(i) => format!("theta{i}"),
            FigureId::Error(i) => format!("e{i}"),
        }
    }

    fn index(&self) -> usize {
        match *self {
            FigureId::Theta(i) | FigureId::Error(i) => i,
        }
    }

    fn y_label(&self) -> String {
        match self {
            FigureId::Theta(i) => format!("estimate of θ{i}"),
            FigureId::Error(i) => format!("e{i} = x{i} − x̂{i}"),
        }
    }

    fn series(&self, r: &ExperimentResult) -> Result<Vec<Signal<f64>>> {
        let i = self.index();
        if i == 0 || i > r.order() {
            return Err(Error::UnknownFigure(self.name()));
        }
        Ok(r.schemes
            .iter()
            .map(|s| match self {
                FigureId::Theta(_) => s.theta_hat.component(i - 1),
                FigureId::Error(_) => s.error.component(i - 1),
            })
            .collect())
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parsed = if let Some(rest) = s.strip_prefix("theta") {
            rest.parse().ok().map(FigureId::Theta)
        } else if let Some(rest) = s.strip_prefix('e') {
            rest.parse().ok().map(FigureId::Error)
        } else {
            None
        };
        match parsed {
            Some(id) if id.index() > 0 => Ok(id),
            _ => Err(Error::UnknownFigure(s.to_string())),
        }
    }
}

/// Fixed 17-significant-digit scientific notation.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `<dir>/<figure>.csv` with columns `t, scheme1, scheme2, scheme3`.
pub fn export_csv(r: &ExperimentResult, figure: FigureId, dir: &Path) -> Result<PathBuf> {
    r.require_nonempty()?;
    let series = figure.series(r)?;
    let path = dir.join(format!("{}.csv", figure.name()));
    let csv_err = |e| Error::Csv {
        path: path.clone(),
        source: e,
    };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=series.len()).map(|j| format!("scheme{j}")));
    w.write_record(&header).map_err(csv_err)?;
    for (k, t) in r.grid.times().enumerate() {
        let mut row = vec![format_value(t)];
        row.extend(series.iter().map(|s| format_value(s.get(k))));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const MAX_POINTS: usize = 2000;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders a standalone SVG line chart with one polyline per scheme.
pub fn render_svg(r: &ExperimentResult, figure: FigureId) -> Result<String> {
    r.require_nonempty()?;
    let series = figure.series(r)?;
    let (t0, t1) = (r.grid.t0(), r.grid.t_end());
    let (mut lo, mut hi) = series
        .iter()
        .flat_map(|s| s.values().iter().copied())
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        (lo, hi) = (-1.0, 1.0);
    }
    if let FigureId::Theta(i) = figure {
        let th = r.theta_true[i - 1];
        lo = lo.min(th);
        hi = hi.max(th);
    }
    if hi - lo < 1e-12 * hi.abs().max(1.0) {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |t: f64| LEFT + (t - t0) / (t1 - t0) * plot_w;
    let py = |v: f64| TOP + (hi - v) / (hi - lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for j in 0..=5 {
        let f = j as f64 / 5.0;
        let (t, v) = (t0 + f * (t1 - t0), lo + f * (hi - lo));
        let (x, y) = (px(t), py(v));
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            TOP + plot_h
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h + 16.0,
            tick_label(t)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            tick_label(v)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">t, s</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(&figure.y_label())
    );
    if let FigureId::Theta(i) = figure {
        let y = py(r.theta_true[i - 1]);
        let _ = writeln!(
            svg,
            r#"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="gray" stroke-dasharray="6 4"/>"#,
            LEFT + plot_w
        );
    }
    let stride = r.grid.len().div_ceil(MAX_POINTS).max(1);
    let last = r.grid.len() - 1;
    for (j, s) in series.iter().enumerate() {
        let mut points = String::new();
        let idx = (0..r.grid.len())
            .step_by(stride)
            .chain((!last.is_multiple_of(stride)).then_some(last));
        for k in idx {
            let v = s.get(k).clamp(lo, hi);
            let _ = write!(points, "{:.2},{:.2} ", px(r.grid.time(k)), py(v));
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            COLORS[j % COLORS.len()],
            points.trim_end()
        );
    }
    for (j, scheme) in r.schemes.iter().enumerate() {
        let y = TOP + 14.0 + 18.0 * j as f64;
        let x = LEFT + plot_w - 230.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"/>"#,
            x + 24.0,
            COLORS[j % COLORS.len()]
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">scheme {}: {}</text>"#,
            x + 30.0,
            y + 4.0,
            j + 1,
            escape(scheme.name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn export_svg(r: &ExperimentResult, figure: FigureId, dir: &Path) -> Result<PathBuf> {
    let svg = render_svg(r, figure)?;
    let path = dir.join(format!("{}.svg", figure.name()));
    fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// `metrics.json`: metrics plus provenance, pretty-printed.
pub fn export_metrics(r: &ExperimentResult, dir: &Path) -> Result<PathBuf> {
    let path = dir.join("metrics.json");
    let doc = serde_json::json!({
        "provenance": r.provenance,
        "theta_true": r.theta_true,
        "metrics": r.metrics,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("metrics serialize");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Creates `dir` and writes every CSV, SVG and the metrics file.
pub fn export_all(r: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for fig in FigureId::all(r.order()) {
        written.push(export_csv(r, fig, dir)?);
        written.push(export_svg(r, fig, dir)?);
    }
    written.push(export_metrics(r, dir)?);
    Ok(written)
}
