//! Synthetic rock piles with known ground truth, rendered under a
//! parametric lighting and sensor model.
//!
//! Scenes are generated by inverse-CDF sampling of sieve sizes from a
//! target Swebrec distribution and dart-throwing placement of shaded
//! ellipses. Rendering is Lambertian over hemispherical-cap normals with
//! a directional source, an evenness field (low-order gradient plus hard
//! cast shadows opposite the source azimuth), and additive sensor noise.
//! Every operation is a pure function of its inputs and seeds.

mod pile;
mod render;

pub use pile::generate_pile;
pub use render::{illumination_field, render};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delineation::LabelMap;
use crate::granulometry::{
    distribution_from_sizes, DistributionBasis, DistributionSource, GranulometryError,
    SieveSeries, SizeDistribution, SwebrecParams,
};

/// One lighting condition, mirroring the experiment tables' columns.
/// The lux columns are recorded data; rendering consumes `pile_illuminance`
/// and `evenness` (plus the source pose for shading direction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightingCondition {
    pub label: String,
    pub pile_illuminance_lx: f64,
    pub source_emittance_lx: Option<f64>,
    pub source_tilt_deg: f64,
    pub source_distance_m: Option<f64>,
    /// 1 = perfectly even illumination.
    pub evenness: f64,
}

impl LightingCondition {
    pub fn even(label: &str, pile_illuminance_lx: f64) -> Self {
        Self {
            label: label.to_string(),
            pile_illuminance_lx,
            source_emittance_lx: None,
            source_tilt_deg: 0.0,
            source_distance_m: None,
            evenness: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.pile_illuminance_lx >= 0.0) {
            return Err(SynthError::Domain(format!(
                "pile illuminance must be >= 0, got {}",
                self.pile_illuminance_lx
            )));
        }
        if !(0.0..=1.0).contains(&self.evenness) {
            return Err(SynthError::Domain(format!(
                "evenness must be in [0, 1], got {}",
                self.evenness
            )));
        }
        Ok(())
    }
}

/// Scale-sphere placement within a scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereSpec {
    pub diameter_mm: f64,
    /// Center as a fraction of the scene extent.
    pub center_frac: (f64, f64),
}

/// Synthetic pile description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Scene extent in meters.
    pub extent_m: (f64, f64),
    pub mm_per_px: f64,
    pub target: SwebrecParams,
    pub particle_count: u32,
    pub packing_seed: u64,
    /// Sampled sizes are restricted to this range; `None` samples the full
    /// distribution support.
    pub size_range_mm: Option<(f64, f64)>,
    /// What the target curve describes about the drawn sizes. `Count`
    /// samples the curve as the size CDF directly; `VolumeProxy` draws so
    /// the pile's d³ mass distribution follows the curve, the way a lab
    /// pile is built to match a sieve reference.
    #[serde(default = "default_sampling_basis")]
    pub sampling_basis: DistributionBasis,
    pub scale_sphere: Option<SphereSpec>,
    /// Allowed overlap fraction of a candidate's pixels during packing.
    pub max_overlap: f64,
    /// Ellipse aspect ratio (major/minor) range.
    pub aspect_range: (f64, f64),
    /// Per-particle albedo jitter range.
    pub albedo_range: (f64, f64),
    /// Flattening of the hemispherical cap normals in (0, 1]: 1 is a full
    /// hemisphere; smaller values model flatter, slabbier fragments.
    #[serde(default = "default_cap_steepness")]
    pub cap_steepness: f64,
}

fn default_cap_steepness() -> f64 {
    0.75
}

impl SceneSpec {
    /// Lab-pile default: coarse gravel down to fine sand on a dark bench,
    /// with a 60 mm scale sphere.
    pub fn default_lab(particle_count: u32, packing_seed: u64) -> Self {
        Self {
            extent_m: (0.4, 0.225),
            mm_per_px: 0.25,
            target: SwebrecParams::new(19.0, 6.0, 2.0).expect("valid defaults"),
            particle_count,
            packing_seed,
            size_range_mm: Some((0.5, 19.0)),
            sampling_basis: DistributionBasis::Count,
            scale_sphere: Some(SphereSpec {
                diameter_mm: 60.0,
                center_frac: (0.84, 0.78),
            }),
            max_overlap: 0.0,
            aspect_range: (1.05, 1.8),
            albedo_range: (0.82, 0.98),
            cap_steepness: default_cap_steepness(),
        }
    }

    pub fn width_px(&self) -> u32 {
        (self.extent_m.0 * 1000.0 / self.mm_per_px).round() as u32
    }

    pub fn height_px(&self) -> u32 {
        (self.extent_m.1 * 1000.0 / self.mm_per_px).round() as u32
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.extent_m.0 > 0.0 && self.extent_m.1 > 0.0) {
            return Err(SynthError::InvalidSpec("extent must be positive".into()));
        }
        if self.particle_count == 0 {
            return Err(SynthError::InvalidSpec("particle_count must be >= 1".into()));
        }
        if !(self.mm_per_px > 0.0) {
            return Err(SynthError::InvalidSpec("mm_per_px must be positive".into()));
        }
        if let Some((lo, hi)) = self.size_range_mm {
            if !(lo > 0.0 && hi > lo) {
                return Err(SynthError::InvalidSpec(format!(
                    "bad size range ({lo}, {hi})"
                )));
            }
        }
        if !(self.aspect_range.0 >= 1.0 && self.aspect_range.1 >= self.aspect_range.0) {
            return Err(SynthError::InvalidSpec("bad aspect range".into()));
        }
        Ok(())
    }
}

/// A placed particle: ellipse geometry in px plus its true sieve size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacedParticle {
    pub center_px: (f64, f64),
    pub semi_major_px: f64,
    pub semi_minor_px: f64,
    pub orientation_rad: f64,
    pub sieve_size_mm: f64,
    pub albedo: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacedSphere {
    pub center_px: (f64, f64),
    pub radius_px: f64,
    pub diameter_mm: f64,
}

/// A generated scene. Geometry only; the truth label map is recomputed
/// deterministically from the placements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub spec: SceneSpec,
    pub width_px: u32,
    pub height_px: u32,
    pub particles: Vec<PlacedParticle>,
    pub sphere: Option<PlacedSphere>,
}

impl Scene {
    /// Rasterizes ground-truth particle labels (1-based in placement
    /// order); the sphere and background are 0.
    pub fn truth_label_map(&self) -> LabelMap {
        pile::rasterize_truth(self)
    }

    /// All drawn sieve sizes, including particles too small to rasterize.
    pub fn sieve_sizes_mm(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.sieve_size_mm).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        serde_json::from_str(text).map_err(|e| SynthError::InvalidSpec(e.to_string()))
    }
}

/// Sensor response: linear gain, additive Gaussian noise (clipped so a
/// zero-signal frame stays within 3σ), 255 full-well clamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorModel {
    /// Gray levels per lux of shaded illuminance.
    pub exposure_gain: f64,
    pub noise_floor_sigma: f64,
    pub full_well: u8,
    pub rng_seed: u64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            exposure_gain: 0.7,
            noise_floor_sigma: 0.4,
            full_well: 255,
            rng_seed: 0,
        }
    }
}

/// Distribution built from the scene's true particle sizes using the same
/// volume-proxy rules as the image-analysis path.
pub fn ground_truth_distribution(
    scene: &Scene,
    sieves: &SieveSeries,
) -> Result<SizeDistribution, GranulometryError> {
    distribution_from_sizes(
        &scene.sieve_sizes_mm(),
        sieves,
        DistributionSource::SieveAnalysis,
    )
}

/// Illuminance delivered to the pile by a source of the given emittance
/// (lux at 1 m): emittance × cos(tilt) / distance².
pub fn illuminance_at_pile(
    source_emittance_lx: f64,
    distance_m: f64,
    tilt_deg: f64,
) -> Result<f64, SynthError> {
    if !(distance_m > 0.0) {
        return Err(SynthError::Domain(format!(
            "distance must be positive, got {distance_m}"
        )));
    }
    if !(0.0..90.0).contains(&tilt_deg) {
        return Err(SynthError::Domain(format!(
            "tilt must be in [0, 90), got {tilt_deg}"
        )));
    }
    Ok(source_emittance_lx * tilt_deg.to_radians().cos() / (distance_m * distance_m))
}

fn default_sampling_basis() -> DistributionBasis {
    DistributionBasis::Count
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("packing failure: placed {placed} of {requested} particles within the overlap bound")]
    PackingFailure { placed: u32, requested: u32 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn illuminance_reference_geometry() {
        assert!((illuminance_at_pile(1000.0, 1.0, 0.0).unwrap() - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_square_falloff() {
        let near = illuminance_at_pile(800.0, 1.0, 0.0).unwrap();
        let far = illuminance_at_pile(800.0, 2.0, 0.0).unwrap();
        assert!((near / far - 4.0).abs() < 1e-12);
    }

    #[test]
    fn tilted_source_hand_value() {
        // 1000 lx-at-1m, 2 m, 60°: 1000 × 0.5 / 4.
        let v = illuminance_at_pile(1000.0, 2.0, 60.0).unwrap();
        assert!((v - 125.0).abs() < 1e-9);
    }

    #[test]
    fn illuminance_domain_errors() {
        assert!(illuminance_at_pile(1000.0, 0.0, 0.0).is_err());
        assert!(illuminance_at_pile(1000.0, 1.0, 90.0).is_err());
        assert!(illuminance_at_pile(1000.0, 1.0, -5.0).is_err());
    }
}
