//! Minimal standalone SVG charts: line, histogram and grouped strip plots.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 360.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let (y0, y1) = if y1 > y0 { (y0, y1) } else { (y0 - 0.5, y0 + 0.5) };
        let (x0, x1) = if x1 > x0 { (x0, x1) } else { (x0 - 0.5, x0 + 0.5) };
        Self { x0, x1, y0, y1 }
    }

    fn x(&self, v: f64) -> f64 {
        LEFT + (v - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        H - BOTTOM - (v - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, escape(title));
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (l, r, t, b) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(out, r#"<path d="M{l} {t}V{b}H{r}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let v = f.y0 + (f.y1 - f.y0) * k as f64 / 4.0;
        let y = f.y(v);
        let _ = writeln!(out, r##"<line x1="{l}" y1="{y:.2}" x2="{r}" y2="{y:.2}" stroke="#ddd"/>"##);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, l - 4.0, y + 4.0, tick(v));
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, H - 10.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.4}")
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// One polyline per series, x = index.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<f64>)]) -> String {
    let n = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let (lo, hi) = range(series.iter().flat_map(|(_, v)| v.iter().copied()));
    let f = if lo.is_finite() { Frame::new(0.0, n.saturating_sub(1) as f64, lo, hi) } else { Frame::new(0.0, 1.0, 0.0, 1.0) };
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, x_label, y_label);
    for (k, (name, v)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::new();
        for (i, &y) in v.iter().enumerate() {
            let _ = write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, f.x(i as f64), f.y(y));
        }
        let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
            LEFT + 8.0,
            TOP + 14.0 * (k as f64 + 1.0),
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Bars for `(lo, hi, count)` bins.
pub fn histogram(title: &str, x_label: &str, bins: &[(f64, f64, usize)]) -> String {
    let x0 = bins.first().map_or(0.0, |b| b.0);
    let x1 = bins.last().map_or(1.0, |b| b.1);
    let top = bins.iter().map(|b| b.2).max().unwrap_or(1).max(1) as f64;
    let f = Frame::new(x0, x1, 0.0, top);
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, x_label, "count");
    for &(lo, hi, c) in bins {
        let (xa, xb) = (f.x(lo), f.x(hi));
        let (ya, yb) = (f.y(c as f64), f.y(0.0));
        let _ = writeln!(
            out,
            r##"<rect x="{xa:.2}" y="{ya:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4" stroke="white"/>"##,
            (xb - xa).max(0.5),
            yb - ya
        );
    }
    let _ = writeln!(out, r#"<text x="{LEFT}" y="{:.2}">{}</text>"#, H - BOTTOM + 14.0, tick(x0));
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, W - RIGHT, H - BOTTOM + 14.0, tick(x1));
    out.push_str("</svg>\n");
    out
}

/// One column of points per group with a bar at the group mean.
pub fn strip_chart(title: &str, y_label: &str, groups: &[(String, Vec<f64>)]) -> String {
    let (lo, hi) = range(groups.iter().flat_map(|(_, v)| v.iter().copied()));
    let pad = if lo.is_finite() { (hi - lo).max(1e-9) * 0.05 } else { 0.5 };
    let f = if lo.is_finite() {
        Frame::new(-0.5, groups.len() as f64 - 0.5, lo - pad, hi + pad)
    } else {
        Frame::new(-0.5, 0.5, 0.0, 1.0)
    };
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, "", y_label);
    for (g, (name, v)) in groups.iter().enumerate() {
        let cx = f.x(g as f64);
        let color = COLORS[g % COLORS.len()];
        for (i, &y) in v.iter().enumerate() {
            let jitter = ((i % 7) as f64 - 3.0) * 3.0;
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}" fill-opacity="0.6"/>"#, cx + jitter, f.y(y));
        }
        if !v.is_empty() {
            let m = f.y(v.iter().sum::<f64>() / v.len() as f64);
            let _ = writeln!(out, r#"<line x1="{:.2}" y1="{m:.2}" x2="{:.2}" y2="{m:.2}" stroke="black" stroke-width="2"/>"#, cx - 18.0, cx + 18.0);
        }
        let _ = writeln!(out, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, H - BOTTOM + 14.0, escape(name));
    }
    out.push_str("</svg>\n");
    out
}
