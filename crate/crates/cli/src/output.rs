//! CSV tables and a bare-bones SVG line plot.

use crate::CliError;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serialises");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

/// Output directory, created if needed.
pub fn out_dir(dir: &Option<PathBuf>) -> Result<Option<PathBuf>, CliError> {
    match dir {
        None => Ok(None),
        Some(d) => {
            std::fs::create_dir_all(d).map_err(|e| CliError::io(d, e))?;
            Ok(Some(d.clone()))
        }
    }
}

/// Single polyline with axis labels and the `y = 0` line when in range.
pub fn line_plot_svg(points: &[(f64, f64)], x_label: &str, y_label: &str) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let finite: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if finite.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * m,
        h - 2.0 * m
    );
    if y0 < 0.0 && y1 > 0.0 {
        let _ = writeln!(s, r#"<line x1="{m}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="gray" stroke-dasharray="4"/>"#, sy(0.0), w - m);
    }
    let path: Vec<String> = finite.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    let _ = writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#, path.join(" "));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{x_label}</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 14 {})">{y_label}</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (v, x, y, anchor) in [(x0, m, h - m + 16.0, "start"), (x1, w - m, h - m + 16.0, "end")] {
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="11">{v:.3}</text>"#);
    }
    for (v, y) in [(y0, h - m), (y1, m + 10.0)] {
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end" font-size="11">{v:.3}</text>"#, m - 4.0);
    }
    s.push_str("</svg>\n");
    s
}
