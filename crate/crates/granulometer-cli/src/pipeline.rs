//! The per-set measurement pipeline behind `analyze`.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use granulometer::delineation::{
    detect_scale_spheres, preprocess, segment_masked, DelineationError, DelineationNet,
    ScaleCalibration,
};
use granulometer::granulometry::{
    build_distribution, combine_distributions, swebrec_fit, SieveSeries, SizeDistribution,
    SwebrecFit,
};
use granulometer::io::{decode_raster, read_scale_annotation, Raster, TracedCircle};

use crate::config::{AnalyzeConfig, ScaleSource};
use crate::report::{ImageRecord, ImageStatus};

pub struct SetAnalysis {
    pub calibration: ScaleCalibration,
    pub images: Vec<ImageRecord>,
    pub nets: Vec<(String, DelineationNet)>,
    pub combined: SizeDistribution,
    pub fitted: Option<SwebrecFit>,
    pub low_contrast_count: usize,
}

pub enum SetOutcome {
    Analyzed(Box<SetAnalysis>),
    /// Every image sat below the low-contrast floor: the dark case.
    AllDark { images: Vec<ImageRecord> },
}

/// Lists the set's images in deterministic name order.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("pgm") | Some("png")
            )
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        anyhow::bail!("no .pgm/.png images in {}", dir.display());
    }
    Ok(paths)
}

struct LoadedImage {
    name: String,
    raster: Raster,
    annotations: Vec<TracedCircle>,
}

/// Runs the measurement pipeline over one image set: preprocess, resolve
/// scale, mask scale objects out of the analysis, segment, build per-image
/// and combined distributions, and fit the combined curve.
pub fn analyze_set(cfg: &AnalyzeConfig) -> Result<SetOutcome> {
    let sieves = SieveSeries::new(cfg.sieves.clone()).map_err(|e| anyhow::anyhow!("{e}"))?;
    let paths = list_images(&cfg.input.images_dir)?;

    let mut images = Vec::new();
    for path in &paths {
        let bytes =
            std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let raster = decode_raster(&bytes).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("image")
            .to_string();
        let annotations = match &cfg.input.annotations_dir {
            Some(dir) => {
                let sidecar = dir.join(format!(
                    "{}.csv",
                    path.file_stem().and_then(|s| s.to_str()).unwrap_or("image")
                ));
                if sidecar.exists() {
                    let text = std::fs::read_to_string(&sidecar)
                        .with_context(|| format!("reading {}", sidecar.display()))?;
                    read_scale_annotation(&text)
                        .map_err(|e| anyhow::anyhow!("{}: {e}", sidecar.display()))?
                } else {
                    Vec::new()
                }
            }
            None => Vec::new(),
        };
        images.push(LoadedImage {
            name,
            raster: preprocess(&raster, &cfg.preprocess),
            annotations,
        });
    }

    // Resolve scale objects per image. With sphere detection, dark or
    // sphere-free frames simply contribute no circles.
    let mut circles_per_image: Vec<Vec<TracedCircle>> = Vec::new();
    for img in &images {
        let circles = match cfg.scale.source {
            ScaleSource::Annotation => img.annotations.clone(),
            ScaleSource::SphereDetect => {
                match detect_scale_spheres(&img.raster, cfg.scale.true_diameter_mm, &cfg.scale.detect)
                {
                    Ok(det) => det
                        .circles
                        .iter()
                        .map(|c| TracedCircle {
                            center: c.center,
                            radius_px: c.radius_px,
                            diameter_mm: cfg.scale.true_diameter_mm,
                        })
                        .collect(),
                    Err(DelineationError::NoScaleFound) => Vec::new(),
                    Err(e) => return Err(anyhow::anyhow!("{}: {e}", img.name)),
                }
            }
        };
        circles_per_image.push(circles);
    }

    // Segment every frame; scale-object regions leave the analysis.
    let mut records = Vec::new();
    let mut nets: Vec<(String, DelineationNet)> = Vec::new();
    let mut low_contrast = 0usize;
    for (img, circles) in images.iter().zip(&circles_per_image) {
        let mask = exclusion_mask(&img.raster, circles);
        match segment_masked(&img.raster, &cfg.segmentation, mask.as_deref()) {
            Ok(net) => {
                records.push(ImageRecord {
                    name: img.name.clone(),
                    status: ImageStatus::Analyzed,
                    particle_count: net.particles.len() as u32,
                    unresolved_fraction: net.unresolved_fraction,
                    distribution: Vec::new(), // filled once the calibration is known
                });
                nets.push((img.name.clone(), net));
            }
            Err(DelineationError::LowContrast { .. }) => {
                low_contrast += 1;
                records.push(ImageRecord {
                    name: img.name.clone(),
                    status: ImageStatus::LowContrast,
                    particle_count: 0,
                    unresolved_fraction: 1.0,
                    distribution: Vec::new(),
                });
            }
            Err(e) => return Err(anyhow::anyhow!("{}: {e}", img.name)),
        }
    }
    if nets.is_empty() {
        return Ok(SetOutcome::AllDark { images: records });
    }

    // One calibration for the whole set: scale does not change between
    // frames of a flight.
    let all_circles: Vec<TracedCircle> = circles_per_image.into_iter().flatten().collect();
    let calibration = ScaleCalibration::from_traces(&all_circles)
        .map_err(|e| anyhow::anyhow!("resolving image scale: {e}"))?;

    for record in records.iter_mut().filter(|r| r.status == ImageStatus::Analyzed) {
        let net = &nets.iter().find(|(n, _)| *n == record.name).expect("net recorded").1;
        if net.particles.is_empty() && net.unresolved_fraction == 0.0 {
            continue;
        }
        let dist = build_distribution(net, &calibration, &sieves, &cfg.fines)
            .map_err(|e| anyhow::anyhow!("{}: {e}", record.name))?;
        record.distribution = dist.points;
    }

    let pairs: Vec<(&DelineationNet, &ScaleCalibration)> =
        nets.iter().map(|(_, n)| (n, &calibration)).collect();
    let combined = combine_distributions(&pairs, &sieves, &cfg.fines)
        .map_err(|e| anyhow::anyhow!("combining distributions: {e}"))?;

    let fitted = fit_distribution(&combined);

    Ok(SetOutcome::Analyzed(Box::new(SetAnalysis {
        calibration,
        images: records,
        nets,
        combined,
        fitted,
        low_contrast_count: low_contrast,
    })))
}

/// Fits the Swebrec curve to a distribution's non-zero points; `None` when
/// fewer than three sieves carry usable values or the fit diverges.
pub fn fit_distribution(dist: &SizeDistribution) -> Option<SwebrecFit> {
    let points: Vec<(f64, f64)> = dist
        .points
        .iter()
        .filter(|p| p.percent_passing > 0.0)
        .map(|p| (p.size_mm, (p.percent_passing / 100.0).min(1.0)))
        .collect();
    swebrec_fit(&points, None).ok()
}

/// Pixels within 1.1× of any traced circle leave the analysis region.
fn exclusion_mask(r: &Raster, circles: &[TracedCircle]) -> Option<Vec<bool>> {
    if circles.is_empty() {
        return None;
    }
    let (w, h) = (r.width() as i64, r.height() as i64);
    let mut mask = vec![false; (w * h) as usize];
    for c in circles {
        let radius = c.radius_px * 1.1;
        let x0 = ((c.center.0 - radius).floor() as i64).max(0);
        let x1 = ((c.center.0 + radius).ceil() as i64).min(w - 1);
        let y0 = ((c.center.1 - radius).floor() as i64).max(0);
        let y1 = ((c.center.1 + radius).ceil() as i64).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = x as f64 - c.center.0;
                let dy = y as f64 - c.center.1;
                if dx * dx + dy * dy <= radius * radius {
                    mask[(y * w + x) as usize] = true;
                }
            }
        }
    }
    Some(mask)
}
