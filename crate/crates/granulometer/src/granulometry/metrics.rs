//! Accuracy metrics: percent-error residuals against a reference curve,
//! the RMS 2-norm between fitted curves, and the maximum-error envelope.

use serde::{Deserialize, Serialize};

use super::{swebrec_eval, GranulometryError, SieveSeries, SizeDistribution, SwebrecParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub size_mm: f64,
    pub p_ia: f64,
    pub p_sa: f64,
    pub residual_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub rows: Vec<ResidualRow>,
    /// RMS percent-passing difference between fitted curves, in percentage
    /// points, when both fits are available.
    pub two_norm: Option<f64>,
    pub envelope_limit: f64,
    pub pass: bool,
}

impl ResidualReport {
    pub fn new(rows: Vec<ResidualRow>, two_norm: Option<f64>, envelope_limit: f64) -> Self {
        let pass = envelope_check(&rows, envelope_limit);
        Self {
            rows,
            two_norm,
            envelope_limit,
            pass,
        }
    }
}

/// Percent error residuals of image analysis against the reference:
/// (P_IA − P_SA) / P_SA × 100 at each sieve size.
pub fn percent_error_residuals(
    ia: &SizeDistribution,
    sa: &SizeDistribution,
    sieves: &SieveSeries,
) -> Result<Vec<ResidualRow>, GranulometryError> {
    sieves
        .sizes()
        .iter()
        .map(|&s| {
            let p_ia = ia.value_at(s);
            let p_sa = sa.value_at(s);
            if p_sa <= 0.0 {
                return Err(GranulometryError::ZeroReference { size_mm: s });
            }
            Ok(ResidualRow {
                size_mm: s,
                p_ia,
                p_sa,
                residual_pct: (p_ia - p_sa) / p_sa * 100.0,
            })
        })
        .collect()
}

/// The maximum-error envelope: pass iff |residual| ≤ limit at every row,
/// boundary inclusive.
pub fn envelope_check(rows: &[ResidualRow], limit_pct: f64) -> bool {
    rows.iter().all(|r| r.residual_pct.abs() <= limit_pct)
}

pub const DEFAULT_ENVELOPE_LIMIT_PCT: f64 = 30.0;

/// RMS difference in percent-passing points between two fitted curves,
/// over `k` log-spaced sizes in `range`.
pub fn two_norm_error(
    fitted_ia: &SwebrecParams,
    reference: &SwebrecParams,
    range: (f64, f64),
    k: usize,
) -> f64 {
    rms_percent_diff(
        |x| 100.0 * swebrec_eval(fitted_ia, x).expect("valid params and positive size"),
        |x| 100.0 * swebrec_eval(reference, x).expect("valid params and positive size"),
        range,
        k,
    )
}

/// Default 2-norm sampling: 50 log-spaced sizes spanning
/// [smallest sieve / 2, reference x_max].
pub fn two_norm_error_default(
    fitted_ia: &SwebrecParams,
    reference: &SwebrecParams,
    sieves: &SieveSeries,
) -> f64 {
    two_norm_error(
        fitted_ia,
        reference,
        (sieves.smallest() / 2.0, reference.x_max_mm),
        50,
    )
}

fn rms_percent_diff(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    range: (f64, f64),
    k: usize,
) -> f64 {
    assert!(k >= 2 && range.0 > 0.0 && range.1 > range.0);
    let (l0, l1) = (range.0.ln(), range.1.ln());
    let mut acc = 0.0;
    for i in 0..k {
        let x = (l0 + (l1 - l0) * i as f64 / (k - 1) as f64).exp();
        let d = f(x) - g(x);
        acc += d * d;
    }
    (acc / k as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::granulometry::{DistributionBasis, DistributionPoint, DistributionSource};

    fn dist(points: &[(f64, f64)]) -> SizeDistribution {
        SizeDistribution::new(
            points
                .iter()
                .map(|&(s, p)| DistributionPoint {
                    size_mm: s,
                    percent_passing: p,
                })
                .collect(),
            DistributionBasis::VolumeProxy,
            DistributionSource::ImageAnalysis,
        )
        .unwrap()
    }

    #[test]
    fn identical_distributions_have_zero_residuals() {
        let d = dist(&[(4.0, 10.0), (9.5, 40.0), (19.0, 100.0)]);
        let sieves = SieveSeries::new(vec![4.0, 9.5, 19.0]).unwrap();
        let rows = percent_error_residuals(&d, &d, &sieves).unwrap();
        assert!(rows.iter().all(|r| r.residual_pct == 0.0));
    }

    #[test]
    fn direct_formula_arithmetic() {
        let ia = dist(&[(4.0, 65.0)]);
        let sa = dist(&[(4.0, 50.0)]);
        let sieves = SieveSeries::new(vec![4.0]).unwrap();
        let rows = percent_error_residuals(&ia, &sa, &sieves).unwrap();
        assert!((rows[0].residual_pct - 30.0).abs() < 1e-12);
    }

    #[test]
    fn zero_reference_is_an_error() {
        let ia = dist(&[(4.0, 5.0)]);
        let sa = dist(&[(4.0, 0.0)]);
        let sieves = SieveSeries::new(vec![4.0]).unwrap();
        assert!(matches!(
            percent_error_residuals(&ia, &sa, &sieves),
            Err(GranulometryError::ZeroReference { .. })
        ));
    }

    fn rows_of(residuals: &[f64]) -> Vec<ResidualRow> {
        residuals
            .iter()
            .map(|&r| ResidualRow {
                size_mm: 1.0,
                p_ia: 0.0,
                p_sa: 1.0,
                residual_pct: r,
            })
            .collect()
    }

    #[test]
    fn envelope_boundary_is_inclusive() {
        assert!(envelope_check(&rows_of(&[10.0, -20.0, 29.9]), 30.0));
        assert!(!envelope_check(&rows_of(&[31.0]), 30.0));
        assert!(envelope_check(&rows_of(&[30.0]), 30.0));
    }

    #[test]
    fn two_norm_of_identical_params_is_zero() {
        let p = SwebrecParams::new(19.0, 6.0, 2.0).unwrap();
        assert_eq!(two_norm_error(&p, &p, (2.0, 19.0), 50), 0.0);
    }

    #[test]
    fn rms_of_constant_offset_is_the_offset() {
        // Two curves differing by a constant 1 percentage point.
        let v = rms_percent_diff(|_| 43.0, |_| 42.0, (2.0, 19.0), 50);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_is_log_linear() {
        let d = dist(&[(1.0, 0.0), (100.0, 100.0)]);
        // Halfway in log space between 1 and 100 is 10.
        assert!((d.value_at(10.0) - 50.0).abs() < 1e-9);
        // Constant extension outside the support.
        assert_eq!(d.value_at(0.5), 0.0);
        assert_eq!(d.value_at(200.0), 100.0);
    }
}
