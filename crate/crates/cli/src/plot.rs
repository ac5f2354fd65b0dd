//! Minimal static SVG line plots.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub loglog: bool,
    pub series: Vec<Series>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub fn render(plot: &Plot) -> Result<String, CliError> {
    let tf = |v: f64| if plot.loglog { v.log10() } else { v };
    let pts: Vec<(f64, f64)> = plot
        .series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite() && (!plot.loglog || (*x > 0.0 && *y > 0.0)))
        .map(|(x, y)| (tf(x), tf(y)))
        .collect();
    if pts.is_empty() {
        return Err(CliError::Plot(format!("plot '{}' has no drawable points", plot.name)));
    }
    let (w, h, m) = (640.0, 420.0, 60.0);
    let span = |a: f64, b: f64| if b - a > 1e-12 { (a, b) } else { (a - 0.5, b + 0.5) };
    let (x0, x1) = span(pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min), pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max));
    let (y0, y1) = span(pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min), pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max));
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, esc(&plot.title));
    let _ = writeln!(
        s,
        r#"<path d="M{m} {} L{m} {} L{} {}" stroke="black" fill="none"/>"#,
        m,
        h - m,
        w - m,
        h - m
    );
    let fmt_tick = |v: f64| if plot.loglog { format!("1e{v:.1}") } else { format!("{v:.3}") };
    for (v, x, y, anchor) in [(x0, px(x0), h - m + 18.0, "start"), (x1, px(x1), h - m + 18.0, "end")] {
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-size="11">{}</text>"#, fmt_tick(v));
    }
    for (v, y) in [(y0, py(y0)), (y1, py(y1))] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"#, m - 4.0, y + 4.0, fmt_tick(v));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, w / 2.0, h - 12.0, esc(&plot.x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        esc(&plot.y_label)
    );
    for (i, ser) in plot.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let drawn: Vec<(f64, f64)> = ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!plot.loglog || (*x > 0.0 && *y > 0.0)))
            .map(|&(x, y)| (px(tf(x)), py(tf(y))))
            .collect();
        if drawn.len() > 1 {
            let d: Vec<String> = drawn.iter().enumerate().map(|(k, (x, y))| format!("{}{x:.2} {y:.2}", if k == 0 { "M" } else { "L" })).collect();
            let _ = writeln!(s, r#"<path d="{}" stroke="{color}" fill="none"/>"#, d.join(" "));
        }
        for (x, y) in &drawn {
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
        }
        let mut label = ser.label.clone();
        if plot.loglog {
            if let Some(k) = loglog_slope(&ser.points) {
                label = format!("{label} (slope {k:.2})");
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            w - m - 160.0,
            m + 14.0 * i as f64,
            esc(&label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn esc(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn emit_plot(plot: &Plot, path: &Path) -> Result<(), CliError> {
    let svg = render(plot)?;
    std::fs::write(path, svg).map_err(|e| CliError::Io(path.display().to_string(), e))
}
