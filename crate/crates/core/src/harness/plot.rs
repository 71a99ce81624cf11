use std::collections::BTreeMap;
use std::fmt::Write;

use super::{AggregateResult, Variant};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn colour(v: Variant) -> &'static str {
    match v {
        Variant::TransferWarmStart => "#1f77b4",
        Variant::TransferOnly => "#ff7f0e",
        Variant::WarmStartOnly => "#2ca02c",
        Variant::Neither => "#d62728",
    }
}

/// Line plot of mean success per variant with shaded 95% intervals.
/// The y axis is fixed to [0, 1].
pub fn render_svg(title: &str, x_label: &str, rows: &[AggregateResult]) -> String {
    let mut series: BTreeMap<Variant, Vec<&AggregateResult>> = BTreeMap::new();
    for r in rows {
        series.entry(r.variant).or_default().push(r);
    }
    for points in series.values_mut() {
        points.sort_by_key(|r| r.x);
    }
    let x_min = rows.iter().map(|r| r.x).min().unwrap_or(0) as f64;
    let x_max = rows.iter().map(|r| r.x).max().unwrap_or(1) as f64;
    let span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let px = |x: usize| MARGIN + (x as f64 - x_min) / span * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - y.clamp(0.0, 1.0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{left},{top} L{left},{bottom} L{right},{bottom}" stroke="black" fill="none"/>"#
    );
    for i in 0..=5 {
        let y = i as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{y:.1}</text>"#,
            left - 6.0,
            py(y) + 4.0
        );
    }
    let mut ticks: Vec<usize> = rows.iter().map(|r| r.x).collect();
    ticks.sort_unstable();
    ticks.dedup();
    let stride = ticks.len().div_ceil(10).max(1);
    for &x in ticks.iter().step_by(stride) {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{x}</text>"#,
            px(x),
            bottom + 16.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );

    for (i, (variant, points)) in series.iter().enumerate() {
        let c = colour(*variant);
        let upper = points
            .iter()
            .map(|p| format!("{:.1},{:.1}", px(p.x), py(p.mean + p.ci95)));
        let lower = points
            .iter()
            .rev()
            .map(|p| format!("{:.1},{:.1}", px(p.x), py(p.mean - p.ci95)));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{c}" fill-opacity="0.15"/>"#,
            band.join(" ")
        );
        let line: Vec<String> = points
            .iter()
            .map(|p| format!("{:.1},{:.1}", px(p.x), py(p.mean)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" stroke="{c}" stroke-width="2" fill="none"/>"#,
            line.join(" ")
        );
        let ly = top + 14.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            right - 70.0,
            right - 50.0,
            right - 45.0,
            ly + 4.0,
            variant.name()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
