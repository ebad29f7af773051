//! Minimal deterministic SVG assembly: fixed float precision, elements in
//! insertion order, no external dependencies.

use std::fmt::Write;

pub struct Svg {
    body: String,
    width: f64,
    height: f64,
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            body: String::new(),
            width,
            height,
        }
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, style: &str) {
        writeln!(
            self.body,
            r#"<rect x="{}" y="{}" width="{}" height="{}" style="{style}"/>"#,
            fmt(x),
            fmt(y),
            fmt(w),
            fmt(h)
        )
        .expect("string write");
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
        writeln!(
            self.body,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" style="{style}"/>"#,
            fmt(x1),
            fmt(y1),
            fmt(x2),
            fmt(y2)
        )
        .expect("string write");
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], id: &str, style: &str) {
        let pts = points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt(x), fmt(y)))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(
            self.body,
            r#"<polyline id="{id}" points="{pts}" style="{style}"/>"#
        )
        .expect("string write");
    }

    pub fn polygon(&mut self, points: &[(f64, f64)], id: &str, style: &str) {
        let pts = points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt(x), fmt(y)))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(
            self.body,
            r#"<polygon id="{id}" points="{pts}" style="{style}"/>"#
        )
        .expect("string write");
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, class: &str, style: &str) {
        writeln!(
            self.body,
            r#"<circle cx="{}" cy="{}" r="{}" class="{class}" style="{style}"/>"#,
            fmt(cx),
            fmt(cy),
            fmt(r)
        )
        .expect("string write");
    }

    pub fn text(&mut self, x: f64, y: f64, content: &str, style: &str) {
        writeln!(
            self.body,
            r#"<text x="{}" y="{}" style="{style}">{}</text>"#,
            fmt(x),
            fmt(y),
            escape(content)
        )
        .expect("string write");
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" \
             viewBox=\"0 0 {} {}\">\n{}</svg>\n",
            fmt(self.width),
            fmt(self.height),
            fmt(self.width),
            fmt(self.height),
            self.body
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Fixed marker palette cycled across conditions.
pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];
