//! TOML configuration schemas for `synth` and `analyze`.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use granulometer::delineation::{ContrastOptions, SegmentationParams, SphereDetectConfig};
use granulometer::granulometry::{DistributionBasis, FinesPolicy, SieveSeries, SwebrecParams};
use granulometer::synthcam::{LightingCondition, SphereSpec};

fn default_sieve_sizes() -> Vec<f64> {
    vec![4.0, 9.5, 12.5, 19.0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub scene: SceneConfig,
    #[serde(default)]
    pub views: ViewConfig,
    #[serde(default)]
    pub sensor: SensorConfig,
    #[serde(default = "default_sieve_sizes")]
    pub sieves: Vec<f64>,
    pub lighting: Vec<LightingCondition>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub particle_count: u32,
    pub mm_per_px: f64,
    pub target: SwebrecParams,
    pub size_range_mm: Option<(f64, f64)>,
    #[serde(default = "SceneConfig::default_basis")]
    pub sampling_basis: DistributionBasis,
    pub scale_sphere: Option<SphereSpec>,
    #[serde(default)]
    pub max_overlap: f64,
    #[serde(default = "SceneConfig::default_aspect_range")]
    pub aspect_range: (f64, f64),
    #[serde(default = "SceneConfig::default_albedo_range")]
    pub albedo_range: (f64, f64),
}

impl SceneConfig {
    fn default_aspect_range() -> (f64, f64) {
        (1.05, 1.8)
    }
    fn default_albedo_range() -> (f64, f64) {
        (0.82, 0.98)
    }
    fn default_basis() -> DistributionBasis {
        DistributionBasis::Count
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ViewConfig {
    pub width_px: u32,
    pub height_px: u32,
    pub jitter_px: u32,
}

impl Default for ViewConfig {
    fn default() -> Self {
        Self {
            width_px: 856,
            height_px: 480,
            jitter_px: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    pub exposure_gain: f64,
    pub noise_floor_sigma: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            exposure_gain: 0.7,
            noise_floor_sigma: 0.4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub input: InputConfig,
    pub scale: ScaleConfig,
    #[serde(default = "default_sieve_sizes")]
    pub sieves: Vec<f64>,
    #[serde(default)]
    pub preprocess: ContrastOptions,
    #[serde(default)]
    pub segmentation: SegmentationParams,
    #[serde(default)]
    pub fines: FinesPolicy,
    /// Echoed into the report for downstream comparison and plotting.
    pub lighting: Option<LightingCondition>,
    pub reference: Option<ReferenceConfig>,
    /// Also export per-image label maps as 16-bit PGM for inspection.
    #[serde(default)]
    pub export_label_maps: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// Directory scanned for *.pgm / *.png, analyzed in name order.
    pub images_dir: PathBuf,
    /// Optional directory of per-image scale annotations (`<stem>.csv`).
    pub annotations_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleConfig {
    pub source: ScaleSource,
    /// True scale-object diameter for sphere detection.
    #[serde(default = "ScaleConfig::default_diameter")]
    pub true_diameter_mm: f64,
    #[serde(default)]
    pub detect: SphereDetectConfig,
}

impl ScaleConfig {
    fn default_diameter() -> f64 {
        60.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleSource {
    SphereDetect,
    Annotation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Reference distribution CSV (size_mm,percent_passing).
    pub csv: PathBuf,
}

pub fn load_synth_config(path: &Path) -> Result<SynthConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading synth config {}", path.display()))?;
    let cfg: SynthConfig =
        toml::from_str(&text).with_context(|| format!("parsing synth config {}", path.display()))?;
    if cfg.lighting.is_empty() {
        anyhow::bail!("synth config needs at least one [[lighting]] condition");
    }
    SieveSeries::new(cfg.sieves.clone()).map_err(|e| anyhow::anyhow!("sieves: {e}"))?;
    Ok(cfg)
}

pub fn load_analyze_config(path: &Path) -> Result<AnalyzeConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading analyze config {}", path.display()))?;
    let cfg: AnalyzeConfig = toml::from_str(&text)
        .with_context(|| format!("parsing analyze config {}", path.display()))?;
    SieveSeries::new(cfg.sieves.clone()).map_err(|e| anyhow::anyhow!("sieves: {e}"))?;
    Ok(cfg)
}
