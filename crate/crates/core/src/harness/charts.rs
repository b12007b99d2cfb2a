//! Dependency-free SVG line charts for the four chart families:
//!
//! * `diversity_vs_n_<metric>.svg`: ILD and both α-nDCG variants against N
//! * `relevance_vs_n_<metric>.svg`: precision, MRR and 1-call against N
//! * `tradeoff_<metric>.svg`: diversity against precision over the lambda
//!   grid at a fixed N, with dotted lines at the baseline's values
//! * `sd_vs_n_lambda_<lambda>.svg`: Sudden Death against N, one per lambda

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::config::ExperimentConfig;
use super::{ResultRow, SdRow};
use crate::metrics::Metric;
use crate::reranker::DiversityKind;

#[derive(Debug, Error)]
pub enum ChartError {
    #[error("no result rows to chart")]
    NoData,
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Optional per-point labels drawn next to the markers.
    pub labels: Vec<String>,
}

/// A dotted reference line.
#[derive(Clone, Debug)]
pub enum Reference {
    Vertical { x: f64, label: String },
    Horizontal { y: f64, label: String },
}

#[derive(Clone, Debug, Default)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Free text stored in the SVG `<desc>` element.
    pub description: String,
    pub series: Vec<Series>,
    pub references: Vec<Reference>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo.abs() > 1e-12 { lo.abs() * 0.1 } else { 0.5 };
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

impl LineChart {
    pub fn render(&self) -> String {
        let xs = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0))
            .chain(self.references.iter().filter_map(|r| match r {
                Reference::Vertical { x, .. } => Some(*x),
                Reference::Horizontal { .. } => None,
            }));
        let ys = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .chain(self.references.iter().filter_map(|r| match r {
                Reference::Horizontal { y, .. } => Some(*y),
                Reference::Vertical { .. } => None,
            }));
        let (x0, x1) = bounds(xs);
        let (y0, y1) = bounds(ys);
        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let px = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
        let py = |y: f64| MARGIN_TOP + plot_h - (y - y0) / (y1 - y0) * plot_h;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, "<title>{}</title>", escape(&self.title));
        let _ = writeln!(s, "<desc>{}</desc>", escape(&self.description));
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            escape(&self.title)
        );
        // Axes and ticks.
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
        );
        for k in 0..=4 {
            let t = f64::from(k) / 4.0;
            let xv = x0 + t * (x1 - x0);
            let yv = y0 + t * (y1 - y0);
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                px(xv),
                MARGIN_TOP + plot_h + 18.0,
                tick(xv)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                MARGIN_LEFT - 6.0,
                py(yv) + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            MARGIN_TOP + plot_h / 2.0,
            MARGIN_TOP + plot_h / 2.0,
            escape(&self.y_label)
        );
        for r in &self.references {
            let (x_a, y_a, x_b, y_b, label) = match r {
                Reference::Vertical { x, label } => (px(*x), MARGIN_TOP, px(*x), MARGIN_TOP + plot_h, label),
                Reference::Horizontal { y, label } => (MARGIN_LEFT, py(*y), MARGIN_LEFT + plot_w, py(*y), label),
            };
            let _ = writeln!(
                s,
                r##"<line class="reference" x1="{x_a:.1}" y1="{y_a:.1}" x2="{x_b:.1}" y2="{y_b:.1}" stroke="#555" stroke-dasharray="2,4"><title>{}</title></line>"##,
                escape(label)
            );
        }
        for (k, series) in self.series.iter().enumerate() {
            let colour = PALETTE[k % PALETTE.len()];
            let pts: Vec<String> = series.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline class="series" data-name="{}" points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
                escape(&series.name),
                pts.join(" ")
            );
            for (j, &(x, y)) in series.points.iter().enumerate() {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{colour}"><title>{}: ({}, {})</title></circle>"#,
                    px(x),
                    py(y),
                    escape(&series.name),
                    tick(x),
                    tick(y)
                );
                if let Some(label) = series.labels.get(j) {
                    let _ = writeln!(
                        s,
                        r#"<text x="{:.1}" y="{:.1}" font-size="9" fill="{colour}">{}</text>"#,
                        px(x) + 4.0,
                        py(y) - 4.0,
                        escape(label)
                    );
                }
            }
            let ly = MARGIN_TOP + 10.0 + 18.0 * k as f64;
            let lx = WIDTH - MARGIN_RIGHT + 14.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                escape(&series.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || (v.fract().abs() < 1e-9 && v.abs() >= 1.0) {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

/// What the chart families need beyond the rows.
#[derive(Clone, Debug)]
pub struct ChartSettings {
    /// Algorithm name -> lambda used when charting it against N.
    pub chart_lambda: BTreeMap<String, f64>,
    pub tradeoff_n: usize,
    pub baseline: String,
}

impl ChartSettings {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            chart_lambda: cfg
                .algorithms
                .iter()
                .map(|&a| (a.algorithm_name().to_string(), cfg.chart_lambda(a)))
                .collect(),
            tradeoff_n: cfg.tradeoff_n,
            baseline: DiversityKind::None.algorithm_name().to_string(),
        }
    }
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

/// Algorithms in first-appearance order.
fn algorithms(rows: &[ResultRow]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rows {
        if !out.contains(&r.algorithm) {
            out.push(r.algorithm.clone());
        }
    }
    out
}

fn metric_vs_n(rows: &[ResultRow], settings: &ChartSettings, metric: Metric) -> LineChart {
    let mut series = Vec::new();
    let mut lambdas = Vec::new();
    for alg in algorithms(rows) {
        let lambda = settings.chart_lambda.get(&alg).copied();
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.algorithm == alg && r.metric == metric)
            .filter(|r| lambda.is_none_or(|l| same(l, r.lambda)))
            .map(|r| (r.n as f64, r.value))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
        if let Some(l) = lambda {
            lambdas.push(format!("{alg}: lambda={l:.2}"));
        }
        series.push(Series {
            name: alg,
            points: pts,
            labels: Vec::new(),
        });
    }
    LineChart {
        title: format!("{metric} vs N"),
        x_label: "N".into(),
        y_label: metric.to_string(),
        description: lambdas.join("; "),
        series,
        references: Vec::new(),
    }
}

fn tradeoff(rows: &[ResultRow], settings: &ChartSettings, metric: Metric) -> LineChart {
    let n = settings.tradeoff_n;
    let at = |alg: &str, m: Metric| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|r| r.algorithm == alg && r.metric == m && r.n == n)
            .map(|r| (r.lambda, r.value))
            .collect()
    };
    let mut series = Vec::new();
    let mut references = Vec::new();
    for alg in algorithms(rows) {
        if alg == settings.baseline {
            let p = at(&alg, Metric::Precision);
            let d = at(&alg, metric);
            if let (Some(p), Some(d)) = (p.first(), d.first()) {
                references.push(Reference::Vertical {
                    x: p.1,
                    label: format!("{alg} precision"),
                });
                references.push(Reference::Horizontal {
                    y: d.1,
                    label: format!("{alg} {metric}"),
                });
            }
            continue;
        }
        let precision = at(&alg, Metric::Precision);
        let diversity = at(&alg, metric);
        let mut pts: Vec<(f64, f64, f64)> = precision
            .iter()
            .filter_map(|&(l, p)| diversity.iter().find(|d| same(d.0, l)).map(|d| (l, p, d.1)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        series.push(Series {
            name: alg,
            labels: pts.iter().map(|p| format!("{:.1}", p.0)).collect(),
            points: pts.iter().map(|p| (p.1, p.2)).collect(),
        });
    }
    LineChart {
        title: format!("precision vs {metric} (N={n})"),
        x_label: "precision".into(),
        y_label: metric.to_string(),
        description: format!("N={n}; points are labelled with lambda; dotted lines mark the baseline"),
        series,
        references,
    }
}

fn sd_vs_n(reports: &[SdRow], lambda: f64) -> LineChart {
    let mut by_alg: Vec<Series> = Vec::new();
    let mut roster = String::new();
    for row in reports.iter().filter(|r| same(r.lambda, lambda)) {
        roster = row.report.roster_label();
        for (alg, &score) in row.report.roster.iter().zip(&row.report.scores) {
            match by_alg.iter_mut().find(|s| &s.name == alg) {
                Some(s) => s.points.push((row.n as f64, score)),
                None => by_alg.push(Series {
                    name: alg.clone(),
                    points: vec![(row.n as f64, score)],
                    labels: Vec::new(),
                }),
            }
        }
    }
    for s in &mut by_alg {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    LineChart {
        title: format!("Sudden Death vs N (lambda={lambda:.2})"),
        x_label: "N".into(),
        y_label: "SD score".into(),
        description: format!("lambda={lambda:.2}; roster={roster}"),
        series: by_alg,
        references: Vec::new(),
    }
}

/// Every chart as `(file name, chart)`.
pub fn build_charts(rows: &[ResultRow], reports: &[SdRow], settings: &ChartSettings) -> Result<Vec<(String, LineChart)>, ChartError> {
    if rows.is_empty() {
        return Err(ChartError::NoData);
    }
    let mut out = Vec::new();
    for metric in Metric::ALL {
        let family = if metric.is_diversity() { "diversity" } else { "relevance" };
        out.push((format!("{family}_vs_n_{metric}.svg"), metric_vs_n(rows, settings, metric)));
    }
    for metric in Metric::ALL.into_iter().filter(|m| m.is_diversity()) {
        out.push((format!("tradeoff_{metric}.svg"), tradeoff(rows, settings, metric)));
    }
    let mut lambdas: Vec<f64> = reports.iter().map(|r| r.lambda).collect();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup_by(|a, b| same(*a, *b));
    for l in lambdas {
        out.push((format!("sd_vs_n_lambda_{l:.2}.svg"), sd_vs_n(reports, l)));
    }
    Ok(out)
}

/// Renders every chart into `dir/charts/`. Nothing is written when `rows`
/// is empty.
pub fn emit_charts(rows: &[ResultRow], reports: &[SdRow], settings: &ChartSettings, dir: &Path) -> Result<Vec<PathBuf>, ChartError> {
    let charts = build_charts(rows, reports, settings)?;
    let chart_dir = dir.join("charts");
    std::fs::create_dir_all(&chart_dir).map_err(|source| ChartError::Io {
        path: chart_dir.clone(),
        source,
    })?;
    let mut paths = Vec::with_capacity(charts.len());
    for (name, chart) in charts {
        let path = chart_dir.join(name);
        std::fs::write(&path, chart.render()).map_err(|source| ChartError::Io {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
    }
    Ok(paths)
}
