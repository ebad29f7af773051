//! Report schemas and the CSV formats shared across commands.
//!
//! All files are UTF-8 with LF line endings and fixed-precision floats, so
//! identical runs produce byte-identical output.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use granulometer::granulometry::{
    DistributionBasis, DistributionPoint, DistributionSource, ResidualRow, SizeDistribution,
    SwebrecFit, SwebrecParams,
};
use granulometer::synthcam::LightingCondition;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedParams {
    pub x_max_mm: f64,
    pub x_50_mm: f64,
    pub b: f64,
    pub rms_residual: f64,
    pub converged: bool,
}

impl From<&SwebrecFit> for FittedParams {
    fn from(fit: &SwebrecFit) -> Self {
        Self {
            x_max_mm: fit.params.x_max_mm,
            x_50_mm: fit.params.x_50_mm,
            b: fit.params.b,
            rms_residual: fit.rms_residual,
            converged: fit.converged,
        }
    }
}

impl FittedParams {
    pub fn params(&self) -> Result<SwebrecParams> {
        SwebrecParams::new(self.x_max_mm, self.x_50_mm, self.b)
            .map_err(|e| anyhow::anyhow!("fitted params: {e}"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageRecord {
    pub name: String,
    pub status: ImageStatus,
    pub particle_count: u32,
    pub unresolved_fraction: f64,
    pub distribution: Vec<DistributionPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageStatus {
    Analyzed,
    LowContrast,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualBlock {
    pub rows: Vec<ResidualRow>,
    /// Absent when either curve fit is unavailable.
    pub two_norm_pct: Option<f64>,
    pub envelope_limit_pct: f64,
    pub envelope_pass: bool,
    pub reference_points: Vec<DistributionPoint>,
    pub reference_fit: Option<FittedParams>,
}

/// Everything the figures display for one analyzed image set; re-plottable
/// without rerunning the pipeline. Timings go to stderr, not into the
/// report, so reruns stay byte-identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub lighting: Option<LightingCondition>,
    pub mm_per_px: f64,
    pub scale_objects: usize,
    pub images: Vec<ImageRecord>,
    pub combined: Vec<DistributionPoint>,
    pub fitted: Option<FittedParams>,
    pub residuals: Option<ResidualBlock>,
}

impl AnalysisReport {
    pub fn combined_distribution(&self) -> Result<SizeDistribution> {
        SizeDistribution::new(
            self.combined.clone(),
            DistributionBasis::VolumeProxy,
            DistributionSource::ImageAnalysis,
        )
        .map_err(|e| anyhow::anyhow!("combined distribution in report: {e}"))
    }

    pub fn label(&self) -> &str {
        self.lighting.as_ref().map_or("unlabeled", |l| l.label.as_str())
    }

    pub fn illuminance(&self) -> f64 {
        self.lighting.as_ref().map_or(f64::NAN, |l| l.pile_illuminance_lx)
    }
}

pub fn load_report(path: &Path) -> Result<AnalysisReport> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing report {}", path.display()))
}

/// One scored report inside a comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub label: String,
    pub pile_illuminance_lx: f64,
    pub evenness: f64,
    pub rows: Vec<ResidualRow>,
    pub two_norm_pct: Option<f64>,
    pub envelope_pass: bool,
    pub fitted: Option<FittedParams>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub reference_points: Vec<DistributionPoint>,
    pub reference_fit: FittedParams,
    pub envelope_limit_pct: f64,
    pub reports: Vec<ComparisonEntry>,
}

pub fn load_comparison(path: &Path) -> Result<Comparison> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing comparison {}", path.display()))
}

// ---------------------------------------------------------------------------
// CSV formats
// ---------------------------------------------------------------------------

pub fn distribution_csv(points: &[DistributionPoint]) -> String {
    let mut out = String::from("size_mm,percent_passing\n");
    for p in points {
        out.push_str(&format!("{:.6},{:.6}\n", p.size_mm, p.percent_passing));
    }
    out
}

pub fn read_distribution_csv(path: &Path, source: DistributionSource) -> Result<SizeDistribution> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("size_mm") {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let size: f64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .with_context(|| format!("{}:{}: bad size", path.display(), idx + 1))?;
        let pct: f64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .with_context(|| format!("{}:{}: bad percent", path.display(), idx + 1))?;
        points.push(DistributionPoint {
            size_mm: size,
            percent_passing: pct,
        });
    }
    SizeDistribution::new(points, DistributionBasis::VolumeProxy, source)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

pub fn residuals_csv(rows: &[ResidualRow]) -> String {
    let mut out = String::from("size_mm,p_ia,p_sa,residual_pct\n");
    for r in rows {
        out.push_str(&format!(
            "{:.6},{:.6},{:.6},{:.6}\n",
            r.size_mm, r.p_ia, r.p_sa, r.residual_pct
        ));
    }
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
