//! Minimal SVG charts for reports.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 48.0;

fn frame(title: &str, x_label: &str, y_label: &str, body: &str, x_max: f64, y_max: f64) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>
<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>
<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>
<text x="{PAD}" y="{}" text-anchor="middle">0</text>
<text x="{}" y="{}" text-anchor="middle">{x_max:.3}</text>
<text x="{}" y="{}" text-anchor="end">{y_max:.3}</text>
"#,
        W / 2.0,
        escape(title),
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD,
        W / 2.0,
        H - 10.0,
        escape(x_label),
        H / 2.0,
        H / 2.0,
        escape(y_label),
        H - PAD + 14.0,
        W - PAD,
        H - PAD + 14.0,
        PAD - 4.0,
        PAD + 4.0,
    );
    s.push_str(body);
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn sx(x: f64, x_max: f64) -> f64 {
    PAD + (W - 2.0 * PAD) * (x / x_max).clamp(0.0, 1.0)
}

fn sy(y: f64, y_max: f64) -> f64 {
    H - PAD - (H - 2.0 * PAD) * (y / y_max).clamp(0.0, 1.0)
}

/// Empirical CDF of non-negative values.
pub fn cdf(title: &str, x_label: &str, values: &[f64]) -> String {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    let x_max = v.last().copied().filter(|m| *m > 0.0).unwrap_or(1.0);
    let n = v.len().max(1) as f64;
    let mut points = String::new();
    for (i, x) in v.iter().enumerate() {
        let _ = write!(
            points,
            "{:.2},{:.2} ",
            sx(*x, x_max),
            sy((i + 1) as f64 / n, 1.0)
        );
    }
    let body = format!(
        r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#,
        points.trim_end()
    );
    frame(title, x_label, "fraction", &body, x_max, 1.0)
}

/// Bars of equal width over [0, x_max].
pub fn histogram(title: &str, x_label: &str, counts: &[usize], x_max: f64) -> String {
    let y_max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let bw = (W - 2.0 * PAD) / counts.len().max(1) as f64;
    let mut body = String::new();
    for (i, c) in counts.iter().enumerate() {
        let top = sy(*c as f64, y_max);
        let _ = writeln!(
            body,
            r#"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="steelblue" stroke="white"/>"#,
            PAD + i as f64 * bw,
            bw,
            H - PAD - top
        );
    }
    frame(title, x_label, "count", &body, x_max, y_max)
}
