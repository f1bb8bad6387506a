//! Minimal SVG line and bar charts for the optional plot outputs.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const M: f64 = 50.0;
const COLORS: [&str; 6] = ["#5b2a86", "#2a9d8f", "#e76f51", "#264653", "#e9c46a", "#8ab17d"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(title: &str, x_label: &str, y_label: &str, body: &str, legend: &[&str]) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = write!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = write!(
        s,
        r#"<line x1="{M}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{M}" y1="{M}" x2="{M}" y2="{}" stroke="black"/>"#,
        H - M,
        W - M,
        H - M,
        H - M
    );
    let _ = write!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 10.0, escape(x_label));
    let _ = write!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    s.push_str(body);
    for (i, name) in legend.iter().enumerate() {
        let y = M + 15.0 * i as f64;
        let _ = write!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            W - M - 110.0,
            y - 9.0,
            COLORS[i % COLORS.len()],
            W - M - 95.0,
            y,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Polyline chart; non-finite points are skipped.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let (x0, x1) = bounds(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)));
    let (y0, y1) = bounds(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)));
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let mut body = String::new();
    for (i, (_, pts)) in series.iter().enumerate() {
        let path: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = write!(
            body,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            COLORS[i % COLORS.len()],
            path.join(" ")
        );
    }
    let _ = write!(body, r#"<text x="{M}" y="{}">{x0:.2}</text><text x="{}" y="{}" text-anchor="end">{x1:.2}</text>"#, H - M + 15.0, W - M, H - M + 15.0);
    let _ = write!(body, r#"<text x="{}" y="{}" text-anchor="end">{y0:.2}</text><text x="{}" y="{M}" text-anchor="end">{y1:.2}</text>"#, M - 3.0, H - M, M - 3.0);
    let names: Vec<&str> = series.iter().map(|s| s.0).collect();
    frame(title, x_label, y_label, &body, &names)
}

/// Grouped bars: one group per category, one bar per series.
pub fn bar_chart(title: &str, y_label: &str, categories: &[String], series: &[(&str, Vec<f64>)]) -> String {
    let (_, y1) = bounds(series.iter().flat_map(|(_, v)| v.iter().copied()).chain([0.0]));
    let group_w = (W - 2.0 * M) / categories.len().max(1) as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    let mut body = String::new();
    for (c, name) in categories.iter().enumerate() {
        let gx = M + c as f64 * group_w + group_w * 0.1;
        for (i, (_, vals)) in series.iter().enumerate() {
            let v = vals.get(c).copied().unwrap_or(0.0);
            if !v.is_finite() {
                continue;
            }
            let h = v / y1 * (H - 2.0 * M);
            let _ = write!(
                body,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                gx + i as f64 * bar_w,
                H - M - h,
                bar_w,
                h,
                COLORS[i % COLORS.len()]
            );
        }
        let _ = write!(body, r#"<text x="{:.2}" y="{}" text-anchor="middle" font-size="10">{}</text>"#, gx + group_w * 0.4, H - M + 14.0, escape(name));
    }
    let _ = write!(body, r#"<text x="{}" y="{M}" text-anchor="end">{y1:.2}</text>"#, M - 3.0);
    let names: Vec<&str> = series.iter().map(|s| s.0).collect();
    frame(title, "", y_label, &body, &names)
}
