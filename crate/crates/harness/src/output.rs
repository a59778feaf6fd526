//! CSV and SVG emission. Numbers are written with Rust's shortest
//! round-trip formatting, so equal inputs give equal bytes.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::experiment::{AggregateCurve, ExperimentOutput, RunResult};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("nothing to write")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `config_id` of a target's rows: the bare id for a single-target
/// experiment, `id/target` otherwise.
pub fn config_id(out: &ExperimentOutput, target: &str) -> String {
    if out.curves.len() <= 1 {
        out.id.clone()
    } else {
        format!("{}/{}", out.id, target)
    }
}

/// Per-run record points: `config_id, run, event_index, value` and, when
/// recorded, one `theta_j` column per component.
pub fn write_runs_csv<W: Write>(out: &ExperimentOutput, writer: W) -> Result<(), OutputError> {
    if out.runs.is_empty() {
        return Err(OutputError::Empty);
    }
    let width = out
        .runs
        .iter()
        .flat_map(|r| r.points.iter())
        .find_map(|p| p.theta.as_ref().map(Vec::len))
        .unwrap_or(0);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["config_id".to_string(), "run".into(), "event_index".into(), "value".into()];
    header.extend((0..width).map(|j| format!("theta_{j}")));
    w.write_record(&header)?;
    let ordered: Vec<&RunResult> = out
        .curves
        .iter()
        .flat_map(|c| out.runs_for(&c.target))
        .collect();
    for r in ordered {
        let id = config_id(out, &r.target);
        for p in &r.points {
            let mut row = vec![id.clone(), r.run.to_string(), p.event_index.to_string(), p.value.to_string()];
            if let Some(theta) = &p.theta {
                row.extend(theta.iter().map(f64::to_string));
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(curve: &AggregateCurve, writer: W) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["event_index", "mean", "stderr", "lo_band", "hi_band"])?;
    for p in &curve.points {
        w.write_record([
            p.event_index.to_string(),
            p.mean.to_string(),
            p.stderr.to_string(),
            p.lo_band.to_string(),
            p.hi_band.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(out: &ExperimentOutput, path: &Path) -> Result<(), OutputError> {
    let mut buf = Vec::new();
    write_runs_csv(out, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn emit_aggregate_csv(curve: &AggregateCurve, path: &Path) -> Result<(), OutputError> {
    let mut buf = Vec::new();
    write_aggregate_csv(curve, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Horizontal reference line, e.g. a Monte-Carlo value for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub target: String,
    pub value: f64,
}

/// Mean curves with their two-standard-error bands, plus dotted reference
/// lines matched to curves by target name.
pub fn render_svg(curves: &[AggregateCurve], references: &[Reference]) -> Result<String, OutputError> {
    if curves.iter().all(|c| c.points.is_empty()) {
        return Err(OutputError::Empty);
    }
    let points = curves.iter().flat_map(|c| c.points.iter());
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p.event_index as f64);
        x1 = x1.max(p.event_index as f64);
        y0 = y0.min(p.lo_band);
        y1 = y1.max(p.hi_band);
    }
    for r in references {
        y0 = y0.min(r.value);
        y1 = y1.max(r.value);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<g class="axes" stroke="black" stroke-width="1"><line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}"/><line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}"/></g>"#
    );
    let _ = writeln!(
        svg,
        r#"<g class="ticks" font-family="sans-serif" font-size="12"><text x="{left}" y="{}" text-anchor="middle">{}</text><text x="{right}" y="{}" text-anchor="middle">{}</text><text x="{}" y="{bottom}" text-anchor="end">{:.3}</text><text x="{}" y="{}" text-anchor="end">{:.3}</text></g>"#,
        bottom + 18.0,
        x0,
        bottom + 18.0,
        x1,
        left - 6.0,
        y0,
        left - 6.0,
        top + 4.0,
        y1
    );

    for (i, curve) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut band = String::new();
        for p in &curve.points {
            let _ = write!(band, "{:.2},{:.2} ", sx(p.event_index as f64), sy(p.hi_band));
        }
        for p in curve.points.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", sx(p.event_index as f64), sy(p.lo_band));
        }
        let line: Vec<String> =
            curve.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.event_index as f64), sy(p.mean))).collect();
        let _ = writeln!(
            svg,
            r#"<polygon class="band" data-target="{}" fill="{color}" fill-opacity="0.2" stroke="none" points="{}"/>"#,
            curve.target,
            band.trim_end()
        );
        let _ = writeln!(
            svg,
            r#"<polyline class="curve" data-target="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            curve.target,
            line.join(" ")
        );
        let ly = top + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text class="legend" x="{}" y="{ly}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            right - 120.0,
            curve.target
        );
    }
    for r in references {
        let i = curves.iter().position(|c| c.target == r.target).unwrap_or(0);
        let color = COLORS[i % COLORS.len()];
        let y = sy(r.value);
        let _ = writeln!(
            svg,
            r#"<line class="reference" data-target="{}" x1="{left}" y1="{y:.2}" x2="{right}" y2="{y:.2}" stroke="{color}" stroke-width="1" stroke-dasharray="2,4"/>"#,
            r.target
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_svg(curves: &[AggregateCurve], references: &[Reference], path: &Path) -> Result<(), OutputError> {
    std::fs::write(path, render_svg(curves, references)?)?;
    Ok(())
}
