//! `plot`: figure analogs from report/comparison files only — no raw
//! images are consumed, so reports stay closed under re-plotting.
//!
//! Two figures: the size-distribution chart (log-size axis, reference
//! curve, shaded ±30% envelope, per-condition sieve points) and the
//! illuminance-vs-2-norm scatter with a log-lux axis.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use granulometer::granulometry::swebrec_eval;

use crate::report::{self, Comparison, ComparisonEntry};
use crate::svg::{Svg, PALETTE};

pub fn run(inputs: &[PathBuf], out: &Path) -> Result<u8> {
    std::fs::create_dir_all(out)?;
    for path in inputs {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("input")
            .to_string();
        let comparison = load_as_comparison(path)?;
        let dist_svg = distribution_figure(&comparison);
        report::write_text(&out.join(format!("{stem}_distribution.svg")), &dist_svg)?;
        if comparison.reports.iter().any(|r| r.two_norm_pct.is_some()) {
            let scatter = two_norm_figure(&comparison);
            report::write_text(&out.join(format!("{stem}_two_norm.svg")), &scatter)?;
        }
    }
    Ok(0)
}

/// Accepts either a comparison file or a single report with an embedded
/// residual block, normalized to a comparison.
fn load_as_comparison(path: &Path) -> Result<Comparison> {
    if let Ok(cmp) = report::load_comparison(path) {
        return Ok(cmp);
    }
    let rep = report::load_report(path)?;
    let block = rep
        .residuals
        .as_ref()
        .with_context(|| format!("{}: report has no reference block to plot against", path.display()))?;
    let reference_fit = block
        .reference_fit
        .clone()
        .with_context(|| format!("{}: reference curve did not fit", path.display()))?;
    Ok(Comparison {
        reference_points: block.reference_points.clone(),
        reference_fit,
        envelope_limit_pct: block.envelope_limit_pct,
        reports: vec![ComparisonEntry {
            label: rep.label().to_string(),
            pile_illuminance_lx: rep.illuminance(),
            evenness: rep.lighting.as_ref().map_or(1.0, |l| l.evenness),
            rows: block.rows.clone(),
            two_norm_pct: block.two_norm_pct,
            envelope_pass: block.envelope_pass,
            fitted: rep.fitted.clone(),
        }],
    })
}

const W: f64 = 720.0;
const H: f64 = 480.0;
const MARGIN: f64 = 56.0;

struct LogAxis {
    min: f64,
    max: f64,
    x0: f64,
    x1: f64,
}

impl LogAxis {
    fn map(&self, v: f64) -> f64 {
        let t = (v.max(self.min).ln() - self.min.ln()) / (self.max.ln() - self.min.ln());
        self.x0 + t * (self.x1 - self.x0)
    }
}

fn y_map(pct: f64, y_max: f64) -> f64 {
    H - MARGIN - (pct / y_max) * (H - 2.0 * MARGIN)
}

fn distribution_figure(cmp: &Comparison) -> String {
    let mut svg = Svg::new(W, H);
    svg.rect(0.0, 0.0, W, H, "fill:#ffffff");

    let ref_params = cmp
        .reference_fit
        .params()
        .expect("comparison stores a valid reference fit");
    let x_min = cmp
        .reference_points
        .iter()
        .map(|p| p.size_mm)
        .fold(f64::INFINITY, f64::min)
        / 2.0;
    let x_max = ref_params.x_max_mm.max(
        cmp.reference_points
            .iter()
            .map(|p| p.size_mm)
            .fold(0.0, f64::max),
    ) * 1.3;
    let axis = LogAxis {
        min: x_min,
        max: x_max,
        x0: MARGIN,
        x1: W - MARGIN,
    };
    let y_max = 100.0;

    // Shaded ±limit% envelope around the reference curve.
    let k = 80;
    let fraction = cmp.envelope_limit_pct / 100.0;
    let curve: Vec<(f64, f64)> = (0..=k)
        .map(|i| {
            let x = (x_min.ln() + (x_max.ln() - x_min.ln()) * i as f64 / k as f64).exp();
            let p = 100.0 * swebrec_eval(&ref_params, x).expect("positive sample size");
            (x, p)
        })
        .collect();
    let mut band: Vec<(f64, f64)> = curve
        .iter()
        .map(|&(x, p)| (axis.map(x), y_map((p * (1.0 + fraction)).min(100.0), y_max)))
        .collect();
    band.extend(
        curve
            .iter()
            .rev()
            .map(|&(x, p)| (axis.map(x), y_map((p * (1.0 - fraction)).max(0.0), y_max))),
    );
    svg.polygon(&band, "envelope-band", "fill:#cccccc;fill-opacity:0.55;stroke:none");

    // Reference curve.
    let ref_line: Vec<(f64, f64)> = curve
        .iter()
        .map(|&(x, p)| (axis.map(x), y_map(p, y_max)))
        .collect();
    svg.polyline(&ref_line, "reference-curve", "fill:none;stroke:#000000;stroke-width:1.5");

    // Axes and ticks.
    svg.line(MARGIN, H - MARGIN, W - MARGIN, H - MARGIN, "stroke:#000000;stroke-width:1");
    svg.line(MARGIN, MARGIN, MARGIN, H - MARGIN, "stroke:#000000;stroke-width:1");
    for decade in [1.0, 10.0] {
        for step in 1..10 {
            let x = decade * step as f64;
            if x < x_min || x > x_max {
                continue;
            }
            let major = step == 1;
            let px = axis.map(x);
            let len = if major { 6.0 } else { 3.0 };
            svg.line(px, H - MARGIN, px, H - MARGIN + len, "stroke:#000000;stroke-width:1");
            if major {
                svg.text(px - 4.0, H - MARGIN + 18.0, &format!("{x:.0}"), "font-size:11px");
            }
        }
    }
    for pct in [0.0, 25.0, 50.0, 75.0, 100.0] {
        let py = y_map(pct, y_max);
        svg.line(MARGIN - 5.0, py, MARGIN, py, "stroke:#000000;stroke-width:1");
        svg.text(MARGIN - 34.0, py + 4.0, &format!("{pct:.0}"), "font-size:11px");
    }
    svg.text(W / 2.0 - 30.0, H - 14.0, "size (mm)", "font-size:12px");
    svg.text(10.0, MARGIN - 12.0, "percent passing (%)", "font-size:12px");

    // Reference sieve points.
    for p in &cmp.reference_points {
        svg.circle(
            axis.map(p.size_mm),
            y_map(p.percent_passing, y_max),
            3.5,
            "reference-point",
            "fill:none;stroke:#000000;stroke-width:1.2",
        );
    }

    // Per-condition sieve points and fitted curves.
    for (i, entry) in cmp.reports.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if let Some(f) = entry.fitted.as_ref().and_then(|f| f.params().ok()) {
            let line: Vec<(f64, f64)> = curve
                .iter()
                .map(|&(x, _)| {
                    let p = 100.0 * swebrec_eval(&f, x).expect("positive sample size");
                    (axis.map(x), y_map(p, y_max))
                })
                .collect();
            svg.polyline(
                &line,
                &format!("fit-{i}"),
                &format!("fill:none;stroke:{color};stroke-width:0.8;stroke-dasharray:4 3"),
            );
        }
        for row in &entry.rows {
            svg.circle(
                axis.map(row.size_mm),
                y_map(row.p_ia, y_max),
                3.0,
                "condition-marker",
                &format!("fill:{color};stroke:none"),
            );
        }
        let legend_y = MARGIN + 16.0 * i as f64;
        svg.circle(W - MARGIN - 150.0, legend_y - 4.0, 3.0, "legend-marker", &format!("fill:{color}"));
        svg.text(
            W - MARGIN - 140.0,
            legend_y,
            &format!(
                "{} ({:.0} lx){}",
                entry.label,
                entry.pile_illuminance_lx,
                if entry.envelope_pass { "" } else { " !" }
            ),
            "font-size:11px",
        );
    }
    svg.finish()
}

fn two_norm_figure(cmp: &Comparison) -> String {
    let mut svg = Svg::new(W, H);
    svg.rect(0.0, 0.0, W, H, "fill:#ffffff");

    let axis = LogAxis {
        min: 1.0,
        max: 20000.0,
        x0: MARGIN,
        x1: W - MARGIN,
    };
    let y_top = cmp
        .reports
        .iter()
        .filter_map(|r| r.two_norm_pct)
        .fold(0.0f64, f64::max)
        .max(1.0)
        * 1.2;

    svg.line(MARGIN, H - MARGIN, W - MARGIN, H - MARGIN, "stroke:#000000;stroke-width:1");
    svg.line(MARGIN, MARGIN, MARGIN, H - MARGIN, "stroke:#000000;stroke-width:1");
    for exp in 0..=4 {
        let x = 10f64.powi(exp);
        let px = axis.map(x);
        svg.line(px, H - MARGIN, px, H - MARGIN + 6.0, "stroke:#000000;stroke-width:1");
        svg.text(px - 8.0, H - MARGIN + 18.0, &format!("1e{exp}"), "font-size:11px");
    }
    for i in 0..=4 {
        let v = y_top * i as f64 / 4.0;
        let py = y_map(v / y_top * 100.0, 100.0);
        svg.line(MARGIN - 5.0, py, MARGIN, py, "stroke:#000000;stroke-width:1");
        svg.text(MARGIN - 44.0, py + 4.0, &format!("{v:.1}"), "font-size:11px");
    }
    svg.text(W / 2.0 - 50.0, H - 14.0, "illuminance (lx)", "font-size:12px");
    svg.text(10.0, MARGIN - 12.0, "2-norm error (pp)", "font-size:12px");

    for (i, entry) in cmp.reports.iter().enumerate() {
        let Some(v) = entry.two_norm_pct else { continue };
        let color = PALETTE[i % PALETTE.len()];
        let px = axis.map(entry.pile_illuminance_lx.max(axis.min));
        let py = y_map(v / y_top * 100.0, 100.0);
        svg.circle(px, py, 4.0, "two-norm-marker", &format!("fill:{color}"));
        svg.text(px + 6.0, py - 6.0, &entry.label, "font-size:10px");
    }
    svg.finish()
}
