//! Minimal deterministic SVG line and scatter charts.

use std::fmt::Write as _;
use std::path::Path;

use super::frontier::FrontierPoint;
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// One named polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub markers: bool,
    pub dashed: bool,
}

fn fmt(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn tick_label(v: f64, step: f64) -> String {
    let digits = if step > 0.0 { (-step.log10().floor()).max(0.0) as usize + 1 } else { 3 };
    let s = format!("{v:.digits$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let span = hi - lo;
    let pad = if span > 0.0 { 0.05 * span } else { lo.abs().max(1.0) * 0.05 };
    (lo - pad, hi + pad)
}

/// Renders the series as a self-contained SVG document.
pub fn render_series_svg(series: &[Series], title: &str, x_label: &str, y_label: &str) -> Result<String> {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if all.is_empty() {
        return Err(Error::EmptyInput);
    }
    if all.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidParams("non-finite chart coordinate".into()));
    }
    let (x0, x1) = range(all.iter().map(|p| p.0));
    let (y0, y1) = range(all.iter().map(|p| p.1));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        fmt(LEFT + pw / 2.0),
        escape(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        fmt(LEFT),
        fmt(TOP),
        fmt(pw),
        fmt(ph)
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = x0 + t * (x1 - x0);
        let yv = y0 + t * (y1 - y0);
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r##"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#444"/><text x="{0}" y="{3}" text-anchor="middle">{4}</text>"##,
            fmt(px),
            fmt(TOP + ph),
            fmt(TOP + ph + 5.0),
            fmt(TOP + ph + 18.0),
            tick_label(xv, (x1 - x0) / 4.0)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="#444"/><text x="{3}" y="{4}" text-anchor="end">{5}</text>"##,
            fmt(LEFT - 5.0),
            fmt(py),
            fmt(LEFT),
            fmt(LEFT - 8.0),
            fmt(py + 4.0),
            tick_label(yv, (y1 - y0) / 4.0)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        fmt(LEFT + pw / 2.0),
        fmt(HEIGHT - 15.0),
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        fmt(TOP + ph / 2.0),
        escape(y_label)
    );
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = ser
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt(sx(x)), fmt(sy(y))))
            .collect();
        if path.len() > 1 {
            let dash = if ser.dashed { r#" stroke-dasharray="5,4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                path.join(" ")
            );
        }
        if ser.markers || path.len() == 1 {
            for &(x, y) in &ser.points {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{}" cy="{}" r="3" fill="{color}"/>"#,
                    fmt(sx(x)),
                    fmt(sy(y))
                );
            }
        }
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            fmt(lx),
            fmt(ly),
            fmt(lx + 20.0),
            fmt(ly),
            fmt(lx + 26.0),
            fmt(ly + 4.0),
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Frontier chart: one polyline per method through its points in radius
/// order, tail premium on the horizontal axis and mean on the vertical.
pub fn render_frontier_svg(points: &[FrontierPoint], path: &Path) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    let svg = frontier_svg_string(points)?;
    std::fs::write(path, svg)?;
    Ok(())
}

pub fn frontier_svg_string(points: &[FrontierPoint]) -> Result<String> {
    let mut methods: Vec<&str> = Vec::new();
    for p in points {
        if !methods.contains(&p.method.as_str()) {
            methods.push(&p.method);
        }
    }
    let series: Vec<Series> = methods
        .iter()
        .map(|m| {
            let mut pts: Vec<&FrontierPoint> = points.iter().filter(|p| p.method == *m).collect();
            pts.sort_by(|a, b| a.eps.total_cmp(&b.eps));
            Series {
                name: m.to_string(),
                points: pts.iter().map(|p| (p.premium, p.mean)).collect(),
                markers: true,
                dashed: false,
            }
        })
        .collect();
    render_series_svg(&series, "Out-of-sample frontier", "CVaR - mean", "mean")
}
