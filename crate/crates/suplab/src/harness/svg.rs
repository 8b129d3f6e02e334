//! Deterministic SVG rendering of result tables. The same rows always
//! produce the same bytes: a fixed 800x500 canvas, coordinates printed at
//! six decimals, series ordered by metric name. Every marker carries the
//! source numbers as data-* attributes so plots stay machine-readable.

use super::csv::ResultRow;
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

pub const CANVAS_W: f64 = 800.0;
pub const CANVAS_H: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 25.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 55.0;

const PALETTE: [&str; 6] = ["#1f6fb2", "#c05020", "#2c8a4b", "#8155a8", "#b08a1e", "#4a4a4a"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Mean per x, one polyline per metric.
    Line,
    /// Line plus a shaded confidence band.
    Band,
    /// Vertical bars of the mean.
    Hist,
}

impl PlotKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(PlotKind::Line),
            "band" => Ok(PlotKind::Band),
            "hist" => Ok(PlotKind::Hist),
            other => Err(Error::Config(format!(
                "unknown plot kind {other:?}, expected line, band, or hist"
            ))),
        }
    }
}

struct Series<'a> {
    metric: &'a str,
    /// (x position in data units, raw x string, row).
    points: Vec<(f64, &'a str, &'a ResultRow)>,
}

/// X positions: numeric values directly when every row parses, with a log10
/// transform once the span exceeds two decades; otherwise first-appearance
/// category indices.
fn x_positions<'a>(rows: &'a [ResultRow], axis: &str) -> (Vec<(f64, &'a str)>, bool) {
    let raw: Vec<&str> = rows.iter().map(|r| r.axis(axis).unwrap_or("")).collect();
    let nums: Option<Vec<f64>> = raw.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(nums) = nums {
        let positive = nums.iter().all(|&v| v > 0.0);
        let lo = nums.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = nums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log = positive && lo > 0.0 && hi / lo >= 100.0;
        let pos = nums
            .iter()
            .map(|&v| if log { v.log10() } else { v })
            .zip(raw)
            .collect();
        return (pos, log);
    }
    let mut seen: Vec<&str> = Vec::new();
    let pos = raw
        .iter()
        .map(|&s| {
            let idx = seen.iter().position(|&t| t == s).unwrap_or_else(|| {
                seen.push(s);
                seen.len() - 1
            });
            (idx as f64, s)
        })
        .collect();
    (pos, false)
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let span = hi - lo;
    let step = 10f64.powf((span / 5.0).log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * step)
        .find(|&s| span / s <= 6.0)
        .unwrap_or(step * 10.0);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span {
        out.push(if t.abs() < 1e-12 * span { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 1e4 || a < 1e-3 {
        format!("{v:.1e}")
    } else if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v}")
    }
}

pub fn render_plot(rows: &[ResultRow], kind: PlotKind) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Data("no rows to plot".into()));
    }
    let axis = rows[0]
        .axes
        .first()
        .map(|(k, _)| k.clone())
        .ok_or_else(|| Error::Data("rows carry no axis to plot against".into()))?;
    let (positions, log_x) = x_positions(rows, &axis);

    let mut series: Vec<Series> = Vec::new();
    for ((x, raw), row) in positions.iter().zip(rows) {
        match series.iter_mut().find(|s| s.metric == row.metric) {
            Some(s) => s.points.push((*x, raw, row)),
            None => series.push(Series { metric: &row.metric, points: vec![(*x, raw, row)] }),
        }
    }
    series.sort_by(|a, b| a.metric.cmp(b.metric));
    for s in series.iter_mut() {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
    }

    let xs: Vec<f64> = positions.iter().map(|(x, _)| *x).collect();
    let mut x_lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut x_hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if x_lo == x_hi {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for row in rows {
        let (lo, hi) = match kind {
            PlotKind::Band => (row.ci_low.min(row.mean), row.ci_high.max(row.mean)),
            _ => (row.mean, row.mean),
        };
        y_lo = y_lo.min(lo);
        y_hi = y_hi.max(hi);
    }
    if kind == PlotKind::Hist {
        y_lo = y_lo.min(0.0);
    }
    if y_lo == y_hi {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let pad = 0.05 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;

    let px = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * (CANVAS_W - MARGIN_L - MARGIN_R);
    let py = |y: f64| CANVAS_H - MARGIN_B - (y - y_lo) / (y_hi - y_lo) * (CANVAS_H - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CANVAS_W}\" height=\"{CANVAS_H}\" \
         viewBox=\"0 0 {CANVAS_W} {CANVAS_H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let _ = write!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{CANVAS_W}\" height=\"{CANVAS_H}\" fill=\"white\"/>\n"
    );

    // Axes and ticks.
    let _ = write!(
        svg,
        "<line x1=\"{:.6}\" y1=\"{:.6}\" x2=\"{:.6}\" y2=\"{:.6}\" stroke=\"black\"/>\n",
        MARGIN_L,
        CANVAS_H - MARGIN_B,
        CANVAS_W - MARGIN_R,
        CANVAS_H - MARGIN_B
    );
    let _ = write!(
        svg,
        "<line x1=\"{:.6}\" y1=\"{:.6}\" x2=\"{:.6}\" y2=\"{:.6}\" stroke=\"black\"/>\n",
        MARGIN_L,
        MARGIN_T,
        MARGIN_L,
        CANVAS_H - MARGIN_B
    );
    for t in nice_ticks(x_lo, x_hi) {
        let x = px(t);
        let label = if log_x { fmt_tick(10f64.powf(t)) } else { fmt_tick(t) };
        let _ = write!(
            svg,
            "<line x1=\"{x:.6}\" y1=\"{:.6}\" x2=\"{x:.6}\" y2=\"{:.6}\" stroke=\"black\"/>\n",
            CANVAS_H - MARGIN_B,
            CANVAS_H - MARGIN_B + 5.0
        );
        let _ = write!(
            svg,
            "<text x=\"{x:.6}\" y=\"{:.6}\" text-anchor=\"middle\">{label}</text>\n",
            CANVAS_H - MARGIN_B + 18.0
        );
    }
    for t in nice_ticks(y_lo, y_hi) {
        let y = py(t);
        let _ = write!(
            svg,
            "<line x1=\"{:.6}\" y1=\"{y:.6}\" x2=\"{:.6}\" y2=\"{y:.6}\" stroke=\"black\"/>\n",
            MARGIN_L - 5.0,
            MARGIN_L
        );
        let _ = write!(
            svg,
            "<text x=\"{:.6}\" y=\"{:.6}\" text-anchor=\"end\">{}</text>\n",
            MARGIN_L - 8.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let x_label = if log_x { format!("{axis} (log)") } else { axis.clone() };
    let _ = write!(
        svg,
        "<text x=\"{:.6}\" y=\"{:.6}\" text-anchor=\"middle\">{x_label}</text>\n",
        MARGIN_L + (CANVAS_W - MARGIN_L - MARGIN_R) / 2.0,
        CANVAS_H - 12.0
    );
    let _ = write!(
        svg,
        "<text x=\"{:.6}\" y=\"{:.6}\" text-anchor=\"start\">{}</text>\n",
        8.0,
        MARGIN_T - 12.0,
        rows[0].experiment
    );

    let bar_w = ((CANVAS_W - MARGIN_L - MARGIN_R) / (rows.len() as f64 + 1.0)).min(40.0) * 0.8;
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        if kind == PlotKind::Band && s.points.len() > 1 {
            let mut d = String::from("M");
            for (x, _, row) in &s.points {
                let _ = write!(d, " {:.6} {:.6}", px(*x), py(row.ci_low));
            }
            for (x, _, row) in s.points.iter().rev() {
                let _ = write!(d, " L {:.6} {:.6}", px(*x), py(row.ci_high));
            }
            d.push_str(" Z");
            let _ = write!(svg, "<path d=\"{d}\" fill=\"{color}\" fill-opacity=\"0.18\"/>\n");
        }
        if kind != PlotKind::Hist && s.points.len() > 1 {
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|(x, _, row)| format!("{:.6},{:.6}", px(*x), py(row.mean)))
                .collect();
            let _ = write!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                pts.join(" ")
            );
        }
        for (x, raw, row) in &s.points {
            let data = format!(
                "data-x=\"{raw}\" data-metric=\"{}\" data-mean=\"{}\" data-ci-low=\"{}\" \
                 data-ci-high=\"{}\"",
                row.metric, row.mean, row.ci_low, row.ci_high
            );
            match kind {
                PlotKind::Hist => {
                    let x0 = px(*x) - bar_w / 2.0;
                    let y_zero = py(0.0f64.clamp(y_lo, y_hi));
                    let y_mean = py(row.mean);
                    let _ = write!(
                        svg,
                        "<rect x=\"{x0:.6}\" y=\"{:.6}\" width=\"{bar_w:.6}\" \
                         height=\"{:.6}\" fill=\"{color}\" {data}/>\n",
                        y_mean.min(y_zero),
                        (y_zero - y_mean).abs()
                    );
                }
                _ => {
                    let _ = write!(
                        svg,
                        "<circle cx=\"{:.6}\" cy=\"{:.6}\" r=\"3\" fill=\"{color}\" {data}/>\n",
                        px(*x),
                        py(row.mean)
                    );
                }
            }
        }
        let _ = write!(
            svg,
            "<text x=\"{:.6}\" y=\"{:.6}\" fill=\"{color}\">{}</text>\n",
            CANVAS_W - MARGIN_R - 180.0,
            MARGIN_T + 16.0 * si as f64,
            s.metric
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(path: &Path, rows: &[ResultRow], kind: PlotKind) -> Result<()> {
    std::fs::write(path, render_plot(rows, kind)?)?;
    Ok(())
}
