//! `analyze`: measure size distributions from an image set and score them
//! against an optional reference.

use std::path::Path;

use anyhow::Result;

use granulometer::granulometry::{
    percent_error_residuals, two_norm_error_default, DistributionSource, ResidualRow, SieveSeries,
    DEFAULT_ENVELOPE_LIMIT_PCT,
};

use crate::config::{load_analyze_config, AnalyzeConfig};
use crate::pipeline::{analyze_set, fit_distribution, SetOutcome};
use crate::report::{
    self, AnalysisReport, FittedParams, ResidualBlock,
};

pub fn run(config_path: &Path, out: &Path) -> Result<u8> {
    let cfg = load_analyze_config(config_path)?;
    let started = std::time::Instant::now();
    std::fs::create_dir_all(out)?;

    match analyze_set(&cfg)? {
        SetOutcome::AllDark { images } => {
            // The dark case: every frame below the low-contrast floor.
            let report = AnalysisReport {
                lighting: cfg.lighting.clone(),
                mm_per_px: f64::NAN,
                scale_objects: 0,
                images,
                combined: Vec::new(),
                fitted: None,
                residuals: None,
            };
            report::write_json(&out.join("report.json"), &report)?;
            eprintln!(
                "analyze: all {} frames below the low-contrast floor (dark case) in {:.2?}",
                report.images.len(),
                started.elapsed()
            );
            Ok(2)
        }
        SetOutcome::Analyzed(set) => {
            let residuals = match &cfg.reference {
                Some(reference) => Some(residual_block(&cfg, &set, reference)?),
                None => None,
            };
            let report = AnalysisReport {
                lighting: cfg.lighting.clone(),
                mm_per_px: set.calibration.mm_per_px,
                scale_objects: set.calibration.n_objects,
                images: set.images.clone(),
                combined: set.combined.points.clone(),
                fitted: set.fitted.as_ref().map(FittedParams::from),
                residuals,
            };
            report::write_json(&out.join("report.json"), &report)?;
            report::write_text(
                &out.join("combined.csv"),
                &report::distribution_csv(&set.combined.points),
            )?;
            if let Some(fit) = &report.fitted {
                report::write_json(&out.join("fitted.json"), fit)?;
            }
            if let Some(block) = &report.residuals {
                report::write_text(&out.join("residuals.csv"), &report::residuals_csv(&block.rows))?;
            }
            if cfg.export_label_maps {
                let dir = out.join("labels");
                std::fs::create_dir_all(&dir)?;
                for (name, net) in &set.nets {
                    let stem = name.rsplit_once('.').map_or(name.as_str(), |(s, _)| s);
                    let map = &net.label_map;
                    let bytes =
                        granulometer::io::encode_label_map_pgm16(map.width, map.height, &map.labels)
                            .map_err(|e| anyhow::anyhow!("label map {name}: {e}"))?;
                    std::fs::write(dir.join(format!("{stem}.pgm")), bytes)?;
                }
            }
            eprintln!(
                "analyze: {} frames ({} dark), {} scale objects, mm_per_px {:.5} in {:.2?}",
                report.images.len(),
                set.low_contrast_count,
                set.calibration.n_objects,
                set.calibration.mm_per_px,
                started.elapsed()
            );
            Ok(0)
        }
    }
}

fn residual_block(
    cfg: &AnalyzeConfig,
    set: &crate::pipeline::SetAnalysis,
    reference: &crate::config::ReferenceConfig,
) -> Result<ResidualBlock> {
    let sieves = SieveSeries::new(cfg.sieves.clone()).map_err(|e| anyhow::anyhow!("{e}"))?;
    let ref_dist = report::read_distribution_csv(&reference.csv, DistributionSource::SieveAnalysis)?;
    let rows: Vec<ResidualRow> = percent_error_residuals(&set.combined, &ref_dist, &sieves)
        .map_err(|e| anyhow::anyhow!("residuals: {e}"))?;
    let ref_fit = fit_distribution(&ref_dist);
    let two_norm = match (&set.fitted, &ref_fit) {
        (Some(ia), Some(sa)) => Some(two_norm_error_default(&ia.params, &sa.params, &sieves)),
        _ => None,
    };
    let pass = granulometer::granulometry::envelope_check(&rows, DEFAULT_ENVELOPE_LIMIT_PCT);
    Ok(ResidualBlock {
        rows,
        two_norm_pct: two_norm,
        envelope_limit_pct: DEFAULT_ENVELOPE_LIMIT_PCT,
        envelope_pass: pass,
        reference_points: ref_dist.points.clone(),
        reference_fit: ref_fit.as_ref().map(FittedParams::from),
    })
}
