//! Static SVG learning curves: per-method mean with a one-standard-deviation
//! band across seeds. Output depends only on the input rows.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::harness::metrics::{aggregate_seeds, AggregatePoint, Metric, MetricsRow};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Render one metric of one phase as an SVG document.
pub fn render_svg(rows: &[MetricsRow], metric: Metric, phase: u8) -> Result<String> {
    let points: Vec<AggregatePoint> = aggregate_seeds(rows)?.into_iter().filter(|p| p.phase == phase).collect();
    if points.is_empty() {
        return Err(Error::Usage(format!("no rows for phase {phase}")));
    }
    let mut methods: Vec<&str> = points.iter().map(|p| p.method.as_str()).collect();
    methods.sort();
    methods.dedup();

    let (mut x_max, mut y_min, mut y_max) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for p in &points {
        let b = p.bands[&metric];
        x_max = x_max.max(p.episode as f64);
        y_min = y_min.min(b.mean - b.sd);
        y_max = y_max.max(b.mean + b.sd);
    }
    if x_max == 0.0 {
        x_max = 1.0;
    }
    if y_max - y_min < 1e-12 {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let sx = |x: f64| MARGIN + x / x_max * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y_min) / (y_max - y_min) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{} (phase {phase})</text>"#,
        WIDTH / 2.0,
        metric.column()
    );
    let (x0, y0, x1, y1) = (sx(0.0), sy(y_min), sx(x_max), sy(y_max));
    let _ = writeln!(svg, r#"<path d="M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}" stroke="black" fill="none"/>"#);
    for (v, y) in [(y_min, y0), (y_max, y1)] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="10">{v:.3}</text>"#,
            x0 - 4.0,
            y + 3.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{x1:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="10">episode {x_max}</text>"#,
        y0 + 16.0
    );

    for (i, m) in methods.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let series: Vec<&AggregatePoint> = points.iter().filter(|p| p.method == *m).collect();
        let upper: Vec<String> = series
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.episode as f64), sy(p.bands[&metric].mean + p.bands[&metric].sd)))
            .collect();
        let lower: Vec<String> = series
            .iter()
            .rev()
            .map(|p| format!("{:.2},{:.2}", sx(p.episode as f64), sy(p.bands[&metric].mean - p.bands[&metric].sd)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{} {}" fill="{colour}" fill-opacity="0.2" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let line: Vec<String> = series
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.episode as f64), sy(p.bands[&metric].mean)))
            .collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#, line.join(" "));
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{colour}">{m}</text>"#,
            WIDTH - MARGIN + 4.0,
            MARGIN + 14.0 * i as f64
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
