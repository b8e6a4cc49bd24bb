use std::fmt::Write;

use super::Histogram;

const SIZE: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let full = SIZE + 2.0 * MARGIN;
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" viewBox="0 0 {full} {full}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN + SIZE / 2.0,
        MARGIN / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, x_label: &str, y_label: &str, x: (f64, f64), y: (f64, f64)) {
    let (x0, y0, x1) = (MARGIN, MARGIN + SIZE, MARGIN + SIZE);
    let _ = writeln!(
        out,
        r#"<path d="M{x0},{} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#,
        MARGIN
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let px = MARGIN + f * SIZE;
        let py = MARGIN + SIZE - f * SIZE;
        let _ = writeln!(
            out,
            r#"<text x="{px}" y="{}" text-anchor="middle">{:.2}</text>"#,
            y0 + 16.0,
            x.0 + f * (x.1 - x.0)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{:.2}</text>"#,
            x0 - 4.0,
            py + 4.0,
            y.0 + f * (y.1 - y.0)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN + SIZE / 2.0,
        y0 + 36.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        MARGIN + SIZE / 2.0,
        MARGIN + SIZE / 2.0,
        escape(y_label)
    );
}

/// Scatter plot with a shared range on both axes and the `y = x` line.
pub fn scatter_svg(points: &[(f64, f64)], title: &str, x_label: &str, y_label: &str) -> String {
    let (mut lo, mut hi) = points
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let map = |v: f64| (v - lo) / (hi - lo) * SIZE;

    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, x_label, y_label, (lo, hi), (lo, hi));
    let _ = writeln!(
        out,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#888" stroke-dasharray="4 3"/>"##,
        MARGIN,
        MARGIN + SIZE,
        MARGIN + SIZE,
        MARGIN
    );
    for &(a, b) in points.iter().filter(|(a, b)| a.is_finite() && b.is_finite()) {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#1f5fa8" fill-opacity="0.6"/>"##,
            MARGIN + map(a),
            MARGIN + SIZE - map(b)
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn histogram_svg(hist: &Histogram, title: &str, x_label: &str) -> String {
    let n = hist.counts.len();
    let max = hist.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let x_hi = hist.lo + n as f64 * hist.width;
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, x_label, "count", (hist.lo, x_hi), (0.0, max));
    let bar_w = SIZE / n as f64;
    for (i, &c) in hist.counts.iter().enumerate() {
        let h = c as f64 / max * SIZE;
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#1f5fa8" stroke="white"/>"##,
            MARGIN + i as f64 * bar_w,
            MARGIN + SIZE - h,
            bar_w,
            h
        );
    }
    out.push_str("</svg>\n");
    out
}
