//! `compare`: score analysis reports against one reference distribution.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use granulometer::granulometry::{
    envelope_check, percent_error_residuals, swebrec_fit, two_norm_error_default,
    DistributionSource, SieveSeries, DEFAULT_ENVELOPE_LIMIT_PCT,
};

use crate::pipeline::fit_distribution;
use crate::report::{self, Comparison, ComparisonEntry, FittedParams};

pub fn run(report_paths: &[PathBuf], reference_csv: &Path, out: &Path) -> Result<u8> {
    std::fs::create_dir_all(out)?;
    let ref_dist = report::read_distribution_csv(reference_csv, DistributionSource::SieveAnalysis)?;

    // The reference must carry enough structure to fit; surfaces
    // TooFewPoints for degenerate references.
    let ref_points: Vec<(f64, f64)> = ref_dist
        .points
        .iter()
        .filter(|p| p.percent_passing > 0.0)
        .map(|p| (p.size_mm, (p.percent_passing / 100.0).min(1.0)))
        .collect();
    let ref_fit = swebrec_fit(&ref_points, None)
        .map_err(|e| anyhow::anyhow!("fitting reference curve: {e}"))?;

    let mut entries = Vec::new();
    for path in report_paths {
        let rep = report::load_report(path)?;
        let combined = rep
            .combined_distribution()
            .with_context(|| format!("{}: no combined distribution", path.display()))?;
        let sieves = SieveSeries::new(combined.points.iter().map(|p| p.size_mm).collect())
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let rows = percent_error_residuals(&combined, &ref_dist, &sieves)
            .map_err(|e| anyhow::anyhow!("{}: residuals: {e}", path.display()))?;
        let fitted = match &rep.fitted {
            Some(f) => Some(f.clone()),
            None => fit_distribution(&combined).as_ref().map(FittedParams::from),
        };
        let two_norm = fitted
            .as_ref()
            .and_then(|f| f.params().ok())
            .map(|p| two_norm_error_default(&p, &ref_fit.params, &sieves));
        entries.push(ComparisonEntry {
            label: rep.label().to_string(),
            pile_illuminance_lx: rep.illuminance(),
            evenness: rep.lighting.as_ref().map_or(1.0, |l| l.evenness),
            envelope_pass: envelope_check(&rows, DEFAULT_ENVELOPE_LIMIT_PCT),
            rows,
            two_norm_pct: two_norm,
            fitted,
        });
    }
    // One summary row per condition, ordered by illuminance.
    entries.sort_by(|a, b| {
        (a.pile_illuminance_lx, a.label.as_str())
            .partial_cmp(&(b.pile_illuminance_lx, b.label.as_str()))
            .expect("finite illuminance")
    });

    let comparison = Comparison {
        reference_points: ref_dist.points.clone(),
        reference_fit: FittedParams::from(&ref_fit),
        envelope_limit_pct: DEFAULT_ENVELOPE_LIMIT_PCT,
        reports: entries,
    };
    report::write_json(&out.join("comparison.json"), &comparison)?;
    report::write_text(&out.join("comparison.csv"), &comparison_csv(&comparison))?;
    Ok(0)
}

fn comparison_csv(cmp: &Comparison) -> String {
    let mut out =
        String::from("label,pile_illuminance_lx,evenness,two_norm_pct,max_abs_residual_pct,envelope_pass\n");
    for e in &cmp.reports {
        let max_abs = e
            .rows
            .iter()
            .map(|r| r.residual_pct.abs())
            .fold(0.0f64, f64::max);
        out.push_str(&format!(
            "{},{:.3},{:.3},{},{:.6},{}\n",
            e.label,
            e.pile_illuminance_lx,
            e.evenness,
            e.two_norm_pct
                .map_or_else(|| "NA".to_string(), |v| format!("{v:.6}")),
            max_abs,
            e.envelope_pass
        ));
    }
    out
}
