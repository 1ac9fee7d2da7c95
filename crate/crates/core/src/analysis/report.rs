//! Report rendering: `summary.csv`, `records.jsonl`, and radar SVGs.
//!
//! The SVG is hand-built text rather than the output of a plotting library:
//! that keeps charts byte-stable across runs, which makes them usable as
//! golden files and in end-to-end determinism checks. The six axis unit
//! vectors are hardcoded exact constants, so no trigonometry enters the
//! output.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::{AggregateSummary, AnalysisError, RadarData, SdDivisor};
use crate::judge::ScoreCard;

/// Chart geometry: a 420×420 canvas, centered, with 34 px per score point.
const SIZE: f64 = 420.0;
const CENTER: f64 = 210.0;
const UNIT: f64 = 34.0;
const MAX_SCORE: f64 = 5.0;

/// Unit vectors for the six axes, clockwise from straight up.
/// (`0.8660254037844387` is √3/2.)
const AXIS_UNIT: [(f64, f64); 6] = [
    (0.0, -1.0),
    (0.8660254037844387, -0.5),
    (0.8660254037844387, 0.5),
    (0.0, 1.0),
    (-0.8660254037844387, 0.5),
    (-0.8660254037844387, -0.5),
];

fn io_error(path: &Path, err: impl std::fmt::Display) -> AnalysisError {
    AnalysisError::Io {
        path: path.display().to_string(),
        message: err.to_string(),
    }
}

/// Make a set label safe for a filename: alphanumerics and dashes survive,
/// everything else becomes `_`.
fn sanitize_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn point(score: f64, axis: usize) -> (f64, f64) {
    let (ux, uy) = AXIS_UNIT[axis];
    let r = score * UNIT;
    (CENTER + r * ux, CENTER + r * uy)
}

fn polygon_points(values: impl Iterator<Item = f64>) -> String {
    let mut points = String::new();
    for (axis, score) in values.enumerate() {
        if axis > 0 {
            points.push(' ');
        }
        let (x, y) = point(score, axis);
        let _ = write!(points, "{x:.2},{y:.2}");
    }
    points
}

/// Render one radar chart as a self-contained SVG document.
pub fn render_radar_svg(radar: &RadarData) -> String {
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SIZE} {SIZE}" width="{SIZE}" height="{SIZE}">"#,
    );
    let _ = writeln!(svg, r##"  <rect width="{SIZE}" height="{SIZE}" fill="#ffffff"/>"##);
    let _ = writeln!(
        svg,
        r##"  <text x="{CENTER}" y="26" text-anchor="middle" font-family="sans-serif" font-size="16" font-weight="bold" fill="#222222">{}</text>"##,
        escape_xml(&radar.set_label)
    );

    // Concentric rings for scores 1..=5.
    for ring in 1..=5u8 {
        let points = polygon_points((0..6).map(|_| f64::from(ring)));
        let _ = writeln!(
            svg,
            r##"  <polygon points="{points}" fill="none" stroke="#d0d0d0" stroke-width="1"/>"##
        );
    }
    // Axis spokes and labels.
    for (axis, id) in radar.axes.iter().enumerate() {
        let (x, y) = point(MAX_SCORE, axis);
        let _ = writeln!(
            svg,
            r##"  <line x1="{CENTER}" y1="{CENTER}" x2="{x:.2}" y2="{y:.2}" stroke="#d0d0d0" stroke-width="1"/>"##
        );
        let (lx, ly) = point(5.45, axis);
        let _ = writeln!(
            svg,
            r##"  <text x="{lx:.2}" y="{ly:.2}" text-anchor="middle" dy="0.35em" font-family="sans-serif" font-size="13" fill="#333333">{}</text>"##,
            id.display_name()
        );
    }
    // Score tick labels up the first axis.
    for ring in 1..=5u8 {
        let (x, y) = point(f64::from(ring), 0);
        let _ = writeln!(
            svg,
            r##"  <text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" fill="#888888">{ring}</text>"##,
            x + 4.0,
            y + 3.0
        );
    }
    // Individual questions, faint.
    for polygon in &radar.per_question {
        let points = polygon_points(polygon.values.iter().map(|&v| f64::from(v)));
        let _ = writeln!(
            svg,
            r##"  <polygon points="{points}" fill="#4a78c2" fill-opacity="0.05" stroke="#4a78c2" stroke-opacity="0.30" stroke-width="1"/>"##
        );
    }
    // The mean polygon, bold.
    let points = polygon_points(radar.mean_polygon.iter().copied());
    let _ = writeln!(
        svg,
        r##"  <polygon points="{points}" fill="#1f4e9c" fill-opacity="0.15" stroke="#1f4e9c" stroke-width="2.5"/>"##
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape_xml(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Write `summary.csv`, `records.jsonl`, and one `radar_<set>.svg` per radar
/// set into `out_dir`. Returns the paths written.
///
/// The CSV opens with a comment record (`# sd_divisor=…`) declaring the
/// standard-deviation convention, then a header row, then one row per
/// set × criterion with mean rounded to 2 decimals and sd to 3.
pub fn render_reports(
    summaries: &[AggregateSummary],
    radar_sets: &[RadarData],
    cards: &[ScoreCard],
    out_dir: &Path,
    divisor: SdDivisor,
) -> Result<Vec<PathBuf>, AnalysisError> {
    fs::create_dir_all(out_dir).map_err(|err| io_error(out_dir, err))?;
    let mut written = Vec::new();

    let csv_path = out_dir.join("summary.csv");
    {
        let mut writer = csv::WriterBuilder::new()
            .flexible(true)
            .from_path(&csv_path)
            .map_err(|err| io_error(&csv_path, err))?;
        writer
            .write_record([format!("# sd_divisor={divisor}")])
            .map_err(|err| io_error(&csv_path, err))?;
        writer
            .write_record(["set_label", "criterion", "n", "mean", "sd", "min", "max"])
            .map_err(|err| io_error(&csv_path, err))?;
        for summary in summaries {
            for (id, stats) in summary.per_criterion.iter() {
                writer
                    .write_record([
                        summary.set_label.as_str(),
                        id.display_name(),
                        &summary.n.to_string(),
                        &format!("{:.2}", stats.mean),
                        &format!("{:.3}", stats.sd),
                        &stats.min.to_string(),
                        &stats.max.to_string(),
                    ])
                    .map_err(|err| io_error(&csv_path, err))?;
            }
        }
        writer.flush().map_err(|err| io_error(&csv_path, err))?;
    }
    written.push(csv_path);

    let records_path = out_dir.join("records.jsonl");
    {
        let mut file = fs::File::create(&records_path).map_err(|err| io_error(&records_path, err))?;
        for card in cards {
            let line = serde_json::to_string(card).map_err(|err| io_error(&records_path, err))?;
            writeln!(file, "{line}").map_err(|err| io_error(&records_path, err))?;
        }
        file.flush().map_err(|err| io_error(&records_path, err))?;
    }
    written.push(records_path);

    for radar in radar_sets {
        let svg_path = out_dir.join(format!("radar_{}.svg", sanitize_label(&radar.set_label)));
        fs::write(&svg_path, render_radar_svg(radar)).map_err(|err| io_error(&svg_path, err))?;
        written.push(svg_path);
    }

    Ok(written)
}
