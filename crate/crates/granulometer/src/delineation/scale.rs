//! Spherical scale-object detection by circular template scoring.
//!
//! Scale spheres render as large, near-uniform bright discs, isolated by
//! experimental design. Detection proceeds by thresholding at a short
//! ladder of brightness quantiles, screening connected components by area
//! and roundness, then refining center and radius against a radial
//! intensity profile (the circular template score). All thresholds are
//! relative to the image's own brightness distribution, so the detector is
//! invariant to uniform brightness scaling that preserves detectability.

use serde::{Deserialize, Serialize};

use crate::io::Raster;

use super::{DelineationError, ScaleCalibration, ScaleMethod};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SphereDetectConfig {
    /// Plausible sphere radius range in px.
    pub radius_range: (f64, f64),
    /// Minimum two-sided roundness (disc coverage and containment).
    pub min_roundness: f64,
    /// Minimum inside-vs-ring contrast, as a fraction of the image's
    /// robust dynamic range.
    pub min_contrast: f64,
}

impl Default for SphereDetectConfig {
    fn default() -> Self {
        Self {
            radius_range: (25.0, 260.0),
            min_roundness: 0.88,
            min_contrast: 0.25,
        }
    }
}

/// One accepted scale object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedCircle {
    pub center: (f64, f64),
    pub radius_px: f64,
    /// Inside-minus-ring mean intensity at the accepted radius.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereDetection {
    pub calibration: ScaleCalibration,
    pub circles: Vec<DetectedCircle>,
}

/// Detects spherical scale objects of known true diameter and derives
/// mm_per_px = true_diameter / mean detected diameter.
pub fn detect_scale_spheres(
    r: &Raster,
    true_diameter_mm: f64,
    cfg: &SphereDetectConfig,
) -> Result<SphereDetection, DelineationError> {
    let circles = detect_circles(r, cfg);
    if circles.is_empty() {
        return Err(DelineationError::NoScaleFound);
    }
    let mean_diam = circles.iter().map(|c| 2.0 * c.radius_px).sum::<f64>() / circles.len() as f64;
    let calibration = ScaleCalibration::new(
        true_diameter_mm / mean_diam,
        ScaleMethod::SphereDetect,
        circles.len(),
    )?;
    Ok(SphereDetection {
        calibration,
        circles,
    })
}

fn detect_circles(r: &Raster, cfg: &SphereDetectConfig) -> Vec<DetectedCircle> {
    let (w, h) = (r.width() as usize, r.height() as usize);
    let dyn_range = (r.percentile(0.99) as f64 - r.percentile(0.01) as f64).max(1.0);
    let min_area = (std::f64::consts::PI * cfg.radius_range.0 * cfg.radius_range.0 * 0.6) as usize;
    let max_area = (std::f64::consts::PI * cfg.radius_range.1 * cfg.radius_range.1 * 1.4) as usize;

    // Quantile ladder: a bright uniform disc shows up at one of these cuts
    // regardless of absolute exposure.
    for q in [0.999, 0.995, 0.98, 0.95, 0.90, 0.80] {
        let cut = r.percentile(q).max(1);
        let mask: Vec<bool> = r.samples().iter().map(|&v| v >= cut).collect();
        let comps = components(&mask, w, h);
        let mut accepted = Vec::new();
        for pixels in comps {
            if pixels.len() < min_area || pixels.len() > max_area {
                continue;
            }
            if let Some(c) = screen_and_refine(r, &pixels, cfg, dyn_range) {
                accepted.push(c);
            }
        }
        if !accepted.is_empty() {
            // Deterministic order: by center position.
            accepted.sort_by(|a, b| {
                (a.center.1, a.center.0)
                    .partial_cmp(&(b.center.1, b.center.0))
                    .expect("finite centers")
            });
            return accepted;
        }
    }
    Vec::new()
}

fn screen_and_refine(
    r: &Raster,
    pixels: &[(u32, u32)],
    cfg: &SphereDetectConfig,
    dyn_range: f64,
) -> Option<DetectedCircle> {
    let n = pixels.len() as f64;
    let cx = pixels.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let cy = pixels.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let r_est = (n / std::f64::consts::PI).sqrt();
    if r_est < cfg.radius_range.0 || r_est > cfg.radius_range.1 {
        return None;
    }

    // Two-sided roundness: the component must fill its model disc and stay
    // inside a slightly larger one. Crescents and saturated rock faces fail.
    let slack = 1.08 * r_est;
    let inside = pixels
        .iter()
        .filter(|p| dist2(p.0 as f64, p.1 as f64, cx, cy) <= slack * slack)
        .count() as f64;
    let containment = inside / n;
    let model_disc = disc_area_px(r, cx, cy, r_est * 0.95);
    let covered = pixels
        .iter()
        .filter(|p| dist2(p.0 as f64, p.1 as f64, cx, cy) <= (r_est * 0.95).powi(2))
        .count() as f64;
    let coverage = if model_disc == 0.0 { 0.0 } else { covered / model_disc };
    if containment < cfg.min_roundness || coverage < cfg.min_roundness {
        return None;
    }

    refine(r, cx, cy, r_est, cfg, dyn_range)
}

/// Center/radius refinement: over a small center grid, build the radial
/// intensity profile and place the radius at the strongest in-vs-out
/// contrast edge within ±15% of the area estimate.
fn refine(
    r: &Raster,
    cx0: f64,
    cy0: f64,
    r_est: f64,
    cfg: &SphereDetectConfig,
    dyn_range: f64,
) -> Option<DetectedCircle> {
    let mut best: Option<DetectedCircle> = None;
    let band = 3.0f64;
    for dy in -2i32..=2 {
        for dx in -2i32..=2 {
            let cx = cx0 + dx as f64;
            let cy = cy0 + dy as f64;
            let profile = radial_profile(r, cx, cy, r_est * 1.25 + band);
            let lo = (r_est * 0.85).max(cfg.radius_range.0).max(band + 1.0);
            let hi = (r_est * 1.15).min(cfg.radius_range.1);
            let mut rr = lo;
            while rr <= hi {
                let inner = profile.mean_band(rr - band, rr);
                let outer = profile.mean_band(rr, rr + band);
                let score = inner - outer;
                if best.as_ref().map_or(true, |b| score > b.score) {
                    best = Some(DetectedCircle {
                        center: (cx, cy),
                        radius_px: rr,
                        score,
                    });
                }
                rr += 0.25;
            }
        }
    }
    let best = best?;
    if best.score < cfg.min_contrast * dyn_range {
        return None;
    }
    Some(best)
}

struct RadialProfile {
    /// (sum, count) per 0.25-px radial bin.
    bins: Vec<(f64, u32)>,
    bin_w: f64,
}

impl RadialProfile {
    fn mean_band(&self, r_lo: f64, r_hi: f64) -> f64 {
        let lo = (r_lo / self.bin_w).max(0.0) as usize;
        let hi = ((r_hi / self.bin_w) as usize).min(self.bins.len().saturating_sub(1));
        let mut sum = 0.0;
        let mut cnt = 0u32;
        for b in &self.bins[lo..=hi.max(lo)] {
            sum += b.0;
            cnt += b.1;
        }
        if cnt == 0 {
            0.0
        } else {
            sum / cnt as f64
        }
    }
}

fn radial_profile(r: &Raster, cx: f64, cy: f64, r_max: f64) -> RadialProfile {
    let bin_w = 0.25;
    let n_bins = (r_max / bin_w) as usize + 2;
    let mut bins = vec![(0.0f64, 0u32); n_bins];
    let x0 = (cx - r_max).floor().max(0.0) as u32;
    let x1 = (cx + r_max).ceil().min(r.width() as f64 - 1.0) as u32;
    let y0 = (cy - r_max).floor().max(0.0) as u32;
    let y1 = (cy + r_max).ceil().min(r.height() as f64 - 1.0) as u32;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d = dist2(x as f64, y as f64, cx, cy).sqrt();
            if d < r_max {
                let b = (d / bin_w) as usize;
                bins[b].0 += r.get(x, y) as f64;
                bins[b].1 += 1;
            }
        }
    }
    RadialProfile { bins, bin_w }
}

fn disc_area_px(r: &Raster, cx: f64, cy: f64, radius: f64) -> f64 {
    let x0 = (cx - radius).floor().max(0.0) as u32;
    let x1 = (cx + radius).ceil().min(r.width() as f64 - 1.0) as u32;
    let y0 = (cy - radius).floor().max(0.0) as u32;
    let y1 = (cy + radius).ceil().min(r.height() as f64 - 1.0) as u32;
    let mut count = 0.0;
    for y in y0..=y1 {
        for x in x0..=x1 {
            if dist2(x as f64, y as f64, cx, cy) <= radius * radius {
                count += 1.0;
            }
        }
    }
    count
}

#[inline]
fn dist2(x: f64, y: f64, cx: f64, cy: f64) -> f64 {
    (x - cx) * (x - cx) + (y - cy) * (y - cy)
}

/// 4-connected components of a mask, as pixel lists in scan order.
fn components(mask: &[bool], w: usize, h: usize) -> Vec<Vec<(u32, u32)>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        let mut pixels = Vec::new();
        seen[start] = true;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let x = idx % w;
            let y = idx / w;
            pixels.push((x as u32, y as u32));
            let mut push = |nb: usize| {
                if mask[nb] && !seen[nb] {
                    seen[nb] = true;
                    stack.push(nb);
                }
            };
            if x > 0 {
                push(idx - 1);
            }
            if x + 1 < w {
                push(idx + 1);
            }
            if y > 0 {
                push(idx - w);
            }
            if y + 1 < h {
                push(idx + w);
            }
        }
        out.push(pixels);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn render_disc(w: u32, h: u32, cx: f64, cy: f64, radius: f64, fg: u8, bg: u8) -> Raster {
        let mut r = Raster::filled(w, h, bg);
        for y in 0..h {
            for x in 0..w {
                if dist2(x as f64, y as f64, cx, cy) <= radius * radius {
                    r.set(x, y, fg);
                }
            }
        }
        r
    }

    #[test]
    fn single_disc_diameter_120_true_60mm() {
        let r = render_disc(400, 300, 200.0, 150.0, 60.0, 230, 12);
        let det = detect_scale_spheres(&r, 60.0, &SphereDetectConfig::default()).unwrap();
        assert_eq!(det.circles.len(), 1);
        assert!(
            (det.calibration.mm_per_px - 0.5).abs() < 0.005,
            "mm_per_px {}",
            det.calibration.mm_per_px
        );
    }

    #[test]
    fn blank_raster_finds_nothing() {
        let r = Raster::filled(200, 200, 40);
        assert!(matches!(
            detect_scale_spheres(&r, 60.0, &SphereDetectConfig::default()),
            Err(DelineationError::NoScaleFound)
        ));
    }

    #[test]
    fn two_discs_average_to_per_object_scale() {
        let mut r = render_disc(600, 300, 150.0, 150.0, 50.0, 230, 12);
        for y in 0..300u32 {
            for x in 0..600u32 {
                if dist2(x as f64, y as f64, 430.0, 150.0) <= 60.0 * 60.0 {
                    r.set(x, y, 230);
                }
            }
        }
        let det = detect_scale_spheres(&r, 60.0, &SphereDetectConfig::default()).unwrap();
        assert_eq!(det.circles.len(), 2);
        // Hand average: mean diameter 110 px, 60 mm true.
        let expect = 60.0 / 110.0;
        assert!(
            (det.calibration.mm_per_px - expect).abs() / expect < 0.01,
            "mm_per_px {} vs {}",
            det.calibration.mm_per_px,
            expect
        );
    }

    #[test]
    fn brightness_scaling_invariance() {
        let bright = render_disc(400, 300, 200.0, 150.0, 60.0, 240, 10);
        let dim = render_disc(400, 300, 200.0, 150.0, 60.0, 60, 2);
        let a = detect_scale_spheres(&bright, 60.0, &SphereDetectConfig::default()).unwrap();
        let b = detect_scale_spheres(&dim, 60.0, &SphereDetectConfig::default()).unwrap();
        assert!((a.calibration.mm_per_px - b.calibration.mm_per_px).abs() < 0.01);
    }

    #[test]
    fn elongated_blob_is_rejected() {
        let mut r = Raster::filled(400, 200, 10);
        for y in 60..140u32 {
            for x in 40..360u32 {
                r.set(x, y, 230);
            }
        }
        assert!(detect_scale_spheres(&r, 60.0, &SphereDetectConfig::default()).is_err());
    }
}
