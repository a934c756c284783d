//! Minimal self-contained SVG line charts of accuracy against `T`.

use std::fmt::Write;

use super::{EvalCurve, CURVE_T_MAX};

const W: f64 = 720.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#7f7f7f"];

fn x_of(tt: f64) -> f64 {
    LEFT + tt / CURVE_T_MAX as f64 * (W - LEFT - RIGHT)
}

fn y_of(acc: f64) -> f64 {
    TOP + (1.0 - acc) * (H - TOP - BOTTOM)
}

/// Accuracy-vs-`T` chart. `event` marks the first contingency and `span`
/// shades the range of second-contingency times, both on the `T` axis.
pub fn svg_chart(title: &str, curves: &[&EvalCurve], event: Option<u32>, span: Option<(u32, u32)>) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" font-size="15" text-anchor="middle">{}</text>"#,
        (W - RIGHT + LEFT) / 2.0,
        escape(title)
    );
    if let Some((a, b)) = span {
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{TOP}" width="{:.1}" height="{}" fill="#eeeeee"/>"##,
            x_of(a as f64),
            x_of(b as f64) - x_of(a as f64),
            H - TOP - BOTTOM
        );
    }
    if let Some(e) = event {
        let x = x_of(e as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{TOP}" x2="{x:.1}" y2="{}" stroke="#999" stroke-dasharray="4 3"/>"##,
            H - BOTTOM
        );
    }
    // Axes and grid.
    for k in 0..=5 {
        let acc = k as f64 / 5.0;
        let y = y_of(acc);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, W - RIGHT);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{acc:.1}</text>"#, LEFT - 6.0, y + 4.0);
    }
    for tt in (0..=CURVE_T_MAX).step_by(20) {
        let x = x_of(tt as f64);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{tt}</text>"#, H - BOTTOM + 18.0);
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">T [s]</text>"#, (W - RIGHT + LEFT) / 2.0, H - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">accuracy</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (i, c) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = c
            .accuracy
            .iter()
            .zip(&c.counts)
            .enumerate()
            .filter(|(_, (_, &n))| n > 0)
            .map(|(tt, (&a, _))| format!("{:.1},{:.1}", x_of(tt as f64), y_of(a)))
            .collect();
        let _ =
            writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#, pts.join(" "));
        let ly = TOP + 14.0 + 20.0 * i as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 22.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 28.0, ly + 4.0, escape(&c.label));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
