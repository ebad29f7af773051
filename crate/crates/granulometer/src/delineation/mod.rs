//! Particle delineation: contrast preprocessing, marker-based watershed
//! segmentation, spherical scale-object detection, and segmentation
//! quality metrics.
//!
//! Segmentation follows the standard published recipe for rock-pile
//! imagery: a gradient-magnitude watershed seeded by markers taken from
//! smoothed low-gradient plateaus (local maxima of the inverted gradient),
//! with sub-threshold regions merged into the unresolved label 0. The
//! analysis region is the estimated pile foreground, so label 0 inside it
//! means fines/unresolved material rather than empty ground.

mod preprocess;
mod quality;
mod scale;
mod watershed;

pub use preprocess::{preprocess, ContrastMode, ContrastOptions};
pub use quality::{match_to_truth, QualityReport};
pub use scale::{detect_scale_spheres, DetectedCircle, SphereDetectConfig, SphereDetection};
pub use watershed::{segment, segment_masked};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Per-pixel particle labels; 0 is background/unresolved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u32>,
}

impl LabelMap {
    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            labels: vec![0; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u32) {
        self.labels[y as usize * self.width as usize + x as usize] = v;
    }

    /// Copies a `w`×`h` window with top-left corner (x0, y0).
    pub fn crop(&self, x0: u32, y0: u32, w: u32, h: u32) -> LabelMap {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "crop out of bounds");
        let mut labels = Vec::with_capacity(w as usize * h as usize);
        for y in y0..y0 + h {
            let row = y as usize * self.width as usize;
            labels.extend_from_slice(&self.labels[row + x0 as usize..row + (x0 + w) as usize]);
        }
        LabelMap {
            width: w,
            height: h,
            labels,
        }
    }
}

/// One delineated particle region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub id: u32,
    /// Region area in px².
    pub area_px: u32,
    pub centroid: (f64, f64),
    /// Full major axis length in px of the moment-equivalent ellipse.
    pub ellipse_major: f64,
    /// Full minor axis length in px; this is the sieve-governing dimension.
    pub ellipse_minor: f64,
}

/// Delineation result for one raster: labeled particles plus the fraction
/// of the analysis region left unresolved (fines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelineationNet {
    pub label_map: LabelMap,
    pub particles: Vec<Particle>,
    /// (pixels labeled 0 inside the analysis region) / (analysis-region pixels).
    pub unresolved_fraction: f64,
    /// Analysis-region size in px (estimated pile foreground minus exclusions).
    pub analysis_area_px: u64,
}

/// How the image scale was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMethod {
    SphereDetect,
    ManualTrace,
}

/// Millimeters-per-pixel calibration derived from scale objects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleCalibration {
    pub mm_per_px: f64,
    pub method: ScaleMethod,
    pub n_objects: usize,
}

impl ScaleCalibration {
    pub fn new(mm_per_px: f64, method: ScaleMethod, n_objects: usize) -> Result<Self, DelineationError> {
        if !(mm_per_px > 0.0) || n_objects == 0 {
            return Err(DelineationError::InvalidCalibration {
                mm_per_px,
                n_objects,
            });
        }
        Ok(Self {
            mm_per_px,
            method,
            n_objects,
        })
    }

    /// Builds the calibration from manually traced circles:
    /// mm_per_px = true diameter / mean traced diameter.
    pub fn from_traces(circles: &[crate::io::TracedCircle]) -> Result<Self, DelineationError> {
        if circles.is_empty() {
            return Err(DelineationError::NoScaleFound);
        }
        let mean_diam_px =
            circles.iter().map(|c| 2.0 * c.radius_px).sum::<f64>() / circles.len() as f64;
        let mean_true_mm =
            circles.iter().map(|c| c.diameter_mm).sum::<f64>() / circles.len() as f64;
        Self::new(mean_true_mm / mean_diam_px, ScaleMethod::ManualTrace, circles.len())
    }
}

/// Segmentation tuning knobs. Defaults target the synthetic rock-pile
/// renders but are exposed end-to-end through the CLI config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationParams {
    /// Marker threshold: quantile of the smoothed gradient over foreground
    /// pixels below which pixels form seed plateaus.
    pub marker_threshold: f64,
    /// Box-blur radius applied twice to the gradient magnitude.
    pub gradient_smoothing_radius: u32,
    /// Regions below this area merge into label 0 (fines).
    pub min_particle_area: u32,
    /// Marker components below this area are discarded as noise.
    pub min_marker_area: u32,
    /// Robust dynamic range (1st..99th percentile span) below this floor
    /// raises `LowContrast`; encodes the dark-case hard failure.
    pub low_contrast_floor: u8,
    /// Foreground threshold; Otsu's method when `None`.
    pub foreground_threshold: Option<u8>,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            marker_threshold: 0.25,
            gradient_smoothing_radius: 2,
            min_particle_area: 9,
            min_marker_area: 4,
            low_contrast_floor: 8,
            foreground_threshold: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum DelineationError {
    #[error("dynamic range {range} below low-contrast floor {floor}")]
    LowContrast { range: u8, floor: u8 },
    #[error("no scale object passed circularity/score thresholds")]
    NoScaleFound,
    #[error("label maps have different dimensions: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("invalid calibration (mm_per_px {mm_per_px}, n_objects {n_objects})")]
    InvalidCalibration { mm_per_px: f64, n_objects: usize },
}
