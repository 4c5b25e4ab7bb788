//! Minimal true-vs-predicted scatter plot.

use std::fmt::Write;

const SIZE: f64 = 480.0;
const PAD: f64 = 48.0;

pub fn scatter_svg(truth: &[f64], pred: &[f64], title: &str) -> String {
    let hi = truth
        .iter()
        .chain(pred)
        .copied()
        .filter(|v| v.is_finite())
        .fold(1.0_f64, f64::max);
    let span = SIZE - 2.0 * PAD;
    let px = |v: f64| PAD + v.clamp(0.0, hi) / hi * span;
    let py = |v: f64| SIZE - PAD - v.clamp(0.0, hi) / hi * span;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, SIZE / 2.0, escape(title));
    // axes
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {} V{} H{}" stroke="black" fill="none"/>"#,
        PAD,
        SIZE - PAD,
        SIZE - PAD
    );
    let _ = writeln!(
        s,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="4 3"/>"#,
        px(0.0),
        py(0.0),
        px(hi),
        py(hi)
    );
    for (t, p) in truth.iter().zip(pred) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.6" fill="steelblue" fill-opacity="0.5"/>"#,
            px(*t),
            py(*p)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">true TTD</text>"#, SIZE / 2.0, SIZE - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">predicted TTD</text>"#,
        SIZE / 2.0,
        SIZE / 2.0
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{hi:.0}</text>"#, SIZE - PAD, SIZE - PAD + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">0</text>"#, PAD - 4.0, SIZE - PAD + 16.0);
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
