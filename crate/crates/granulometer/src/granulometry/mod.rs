//! Size distributions, Swebrec curve fitting, and accuracy metrics.

mod distribution;
mod metrics;
mod swebrec;

pub use distribution::{
    build_distribution, combine_distributions, distribution_from_sizes, equivalent_sieve_size,
    FinesPolicy,
};
pub use metrics::{
    envelope_check, percent_error_residuals, two_norm_error, two_norm_error_default,
    ResidualReport, ResidualRow, DEFAULT_ENVELOPE_LIMIT_PCT,
};
pub use swebrec::{swebrec_eval, swebrec_fit, swebrec_invert, SwebrecFit};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Strictly ascending sieve apertures in millimeters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SieveSeries {
    sizes: Vec<f64>,
}

impl SieveSeries {
    pub fn new(sizes: Vec<f64>) -> Result<Self, GranulometryError> {
        if sizes.is_empty() {
            return Err(GranulometryError::InvalidSieves("empty series".into()));
        }
        for w in sizes.windows(2) {
            if !(w[1] > w[0]) {
                return Err(GranulometryError::InvalidSieves(format!(
                    "sizes must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if !(sizes[0] > 0.0) {
            return Err(GranulometryError::InvalidSieves(format!(
                "sizes must be positive, got {}",
                sizes[0]
            )));
        }
        Ok(Self { sizes })
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    pub fn smallest(&self) -> f64 {
        self.sizes[0]
    }

    pub fn largest(&self) -> f64 {
        *self.sizes.last().expect("non-empty series")
    }
}

impl Default for SieveSeries {
    /// The default test series; the reference screen sizes themselves are a
    /// configuration choice.
    fn default() -> Self {
        Self::new(vec![4.0, 9.5, 12.5, 19.0]).expect("valid default series")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionBasis {
    VolumeProxy,
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionSource {
    ImageAnalysis,
    SieveAnalysis,
    SwebrecModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionPoint {
    pub size_mm: f64,
    pub percent_passing: f64,
}

/// Monotone cumulative percent-passing points over sizes in millimeters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeDistribution {
    pub points: Vec<DistributionPoint>,
    pub basis: DistributionBasis,
    pub source: DistributionSource,
}

impl SizeDistribution {
    pub fn new(
        points: Vec<DistributionPoint>,
        basis: DistributionBasis,
        source: DistributionSource,
    ) -> Result<Self, GranulometryError> {
        if points.is_empty() {
            return Err(GranulometryError::Domain("empty distribution".into()));
        }
        for w in points.windows(2) {
            if !(w[1].size_mm > w[0].size_mm) {
                return Err(GranulometryError::Domain(
                    "distribution sizes must be strictly increasing".into(),
                ));
            }
            if w[1].percent_passing + 1e-9 < w[0].percent_passing {
                return Err(GranulometryError::Domain(
                    "percent passing must be non-decreasing".into(),
                ));
            }
        }
        for p in &points {
            if !(p.size_mm > 0.0) || !(-1e-9..=100.0 + 1e-9).contains(&p.percent_passing) {
                return Err(GranulometryError::Domain(format!(
                    "point out of range: {} mm, {} %",
                    p.size_mm, p.percent_passing
                )));
            }
        }
        Ok(Self {
            points,
            basis,
            source,
        })
    }

    /// Percent passing at an arbitrary size, by linear interpolation in
    /// (log size, percent) space with constant extension outside the
    /// recorded points.
    pub fn value_at(&self, size_mm: f64) -> f64 {
        let pts = &self.points;
        if size_mm <= pts[0].size_mm {
            return pts[0].percent_passing;
        }
        if size_mm >= pts[pts.len() - 1].size_mm {
            return pts[pts.len() - 1].percent_passing;
        }
        let ls = size_mm.ln();
        for w in pts.windows(2) {
            if size_mm <= w[1].size_mm {
                let l0 = w[0].size_mm.ln();
                let l1 = w[1].size_mm.ln();
                let t = (ls - l0) / (l1 - l0);
                return w[0].percent_passing + t * (w[1].percent_passing - w[0].percent_passing);
            }
        }
        pts[pts.len() - 1].percent_passing
    }
}

/// Swebrec cumulative size-distribution parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwebrecParams {
    pub x_max_mm: f64,
    pub x_50_mm: f64,
    pub b: f64,
}

impl SwebrecParams {
    pub fn new(x_max_mm: f64, x_50_mm: f64, b: f64) -> Result<Self, GranulometryError> {
        if !(x_50_mm > 0.0) || !(x_max_mm > x_50_mm) || !(b > 0.0) {
            return Err(GranulometryError::InvalidParams(format!(
                "require x_max > x_50 > 0 and b > 0, got ({x_max_mm}, {x_50_mm}, {b})"
            )));
        }
        Ok(Self {
            x_max_mm,
            x_50_mm,
            b,
        })
    }

    /// Samples the curve into a percent-passing distribution.
    pub fn sample_distribution(&self, sizes: &[f64]) -> Result<SizeDistribution, GranulometryError> {
        let points = sizes
            .iter()
            .map(|&s| {
                swebrec_eval(self, s).map(|p| DistributionPoint {
                    size_mm: s,
                    percent_passing: 100.0 * p,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        SizeDistribution::new(points, DistributionBasis::VolumeProxy, DistributionSource::SwebrecModel)
    }
}

#[derive(Debug, Error)]
pub enum GranulometryError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid sieve series: {0}")]
    InvalidSieves(String),
    #[error("invalid Swebrec parameters: {0}")]
    InvalidParams(String),
    #[error("delineation net has no particles and no unresolved area")]
    EmptyNet,
    #[error("no nets supplied")]
    EmptyInput,
    #[error("need at least {needed} fit points with distinct sizes, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("fit did not converge after {iterations} iterations (rms {rms:.3e})")]
    NoConvergence { iterations: usize, rms: f64 },
    #[error("reference percent passing is zero at {size_mm} mm")]
    ZeroReference { size_mm: f64 },
}
