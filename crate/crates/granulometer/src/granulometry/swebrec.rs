//! Swebrec cumulative distribution: evaluation and least-squares fitting.
//!
//! P(x) = 1 / (1 + [ln(x_max/x) / ln(x_max/x_50)]^b) for 0 < x ≤ x_max,
//! and P(x) = 1 beyond x_max. P(x_50) = 1/2 and P(x_max) = 1 hold by
//! construction for every valid parameter set.

use super::{GranulometryError, SwebrecParams};

/// Evaluates the cumulative curve; returns a fraction in [0, 1].
pub fn swebrec_eval(params: &SwebrecParams, x_mm: f64) -> Result<f64, GranulometryError> {
    if !(x_mm > 0.0) || !x_mm.is_finite() {
        return Err(GranulometryError::Domain(format!(
            "size must be positive and finite, got {x_mm}"
        )));
    }
    SwebrecParams::new(params.x_max_mm, params.x_50_mm, params.b)?;
    Ok(eval_raw(params.x_max_mm, params.x_50_mm, params.b, x_mm))
}

#[inline]
fn eval_raw(x_max: f64, x_50: f64, b: f64, x: f64) -> f64 {
    if x >= x_max {
        return 1.0;
    }
    let scale = (x_max / x_50).ln();
    let t = (x_max / x).ln() / scale;
    1.0 / (1.0 + t.powf(b))
}

/// Inverse of the cumulative curve: the size at which P(x) = p.
/// Closed form; used by the synthetic pile sampler.
fn invert_raw(x_max: f64, x_50: f64, b: f64, p: f64) -> f64 {
    debug_assert!(p > 0.0 && p <= 1.0);
    if p >= 1.0 {
        return x_max;
    }
    let t = ((1.0 - p) / p).powf(1.0 / b);
    x_max * (-t * (x_max / x_50).ln()).exp()
}

/// Quantile function of the cumulative curve. Fractions at or below zero
/// clamp to a vanishingly small size.
pub fn swebrec_invert(params: &SwebrecParams, p: f64) -> f64 {
    invert_raw(params.x_max_mm, params.x_50_mm, params.b, p.clamp(1e-12, 1.0))
}

/// Fit result: parameters plus convergence diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwebrecFit {
    pub params: SwebrecParams,
    /// RMS of the final residuals, in percent-passing fraction units.
    pub rms_residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Least-squares Swebrec fit to (size mm, passing fraction) points.
///
/// The solver is a damped (Levenberg-style) least-squares iteration in the
/// reparameterization (ln x_50, ln ln(x_max/x_50), ln b), which enforces
/// x_max > x_50 > 0 and b > 0 without constraint machinery. The default
/// initialization takes x_50 from the data's 50% crossing, x_max from 1.5×
/// the largest observed size, and b = 2.
pub fn swebrec_fit(
    points: &[(f64, f64)],
    init: Option<SwebrecParams>,
) -> Result<SwebrecFit, GranulometryError> {
    for &(x, y) in points {
        if !(x > 0.0) || !x.is_finite() {
            return Err(GranulometryError::Domain(format!(
                "fit point size must be positive, got {x}"
            )));
        }
        if !(y > 0.0 && y <= 1.0 + 1e-12) {
            return Err(GranulometryError::Domain(format!(
                "fit point fraction must be in (0, 1], got {y}"
            )));
        }
    }
    let mut sizes: Vec<f64> = points.iter().map(|p| p.0).collect();
    sizes.sort_by(|a, b| a.partial_cmp(b).expect("finite sizes"));
    sizes.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * b.abs().max(1.0));
    if sizes.len() < 3 {
        return Err(GranulometryError::TooFewPoints {
            needed: 3,
            got: sizes.len(),
        });
    }

    let u0 = match init {
        Some(p) => {
            SwebrecParams::new(p.x_max_mm, p.x_50_mm, p.b)?;
            [
                p.x_50_mm.ln(),
                (p.x_max_mm.ln() - p.x_50_mm.ln()).ln(),
                p.b.ln(),
            ]
        }
        None => default_init(points),
    };

    let residuals = |u: &[f64; 3], out: &mut Vec<f64>| {
        let (x_max, x_50, b) = unpack(u);
        out.clear();
        for &(x, y) in points {
            out.push(eval_raw(x_max, x_50, b, x) - y);
        }
    };

    let (u, cost, converged, iterations) = levenberg(u0, points.len(), residuals);
    let (x_max, x_50, b) = unpack(&u);
    let rms = (cost / points.len() as f64).sqrt();
    if !converged {
        return Err(GranulometryError::NoConvergence { iterations, rms });
    }
    Ok(SwebrecFit {
        params: SwebrecParams::new(x_max, x_50, b)?,
        rms_residual: rms,
        converged,
        iterations,
    })
}

fn unpack(u: &[f64; 3]) -> (f64, f64, f64) {
    let x_50 = u[0].exp();
    let x_max = (u[0] + u[1].exp()).exp();
    let b = u[2].exp();
    (x_max, x_50, b)
}

fn default_init(points: &[(f64, f64)]) -> [f64; 3] {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite sizes"));
    let max_size = pts.last().expect("non-empty").0;

    // 50% crossing in (log size, fraction) space.
    let mut x_50 = None;
    for w in pts.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        if (y0 - 0.5) * (y1 - 0.5) <= 0.0 && y0 != y1 {
            let t = (0.5 - y0) / (y1 - y0);
            x_50 = Some((x0.ln() + t * (x1.ln() - x0.ln())).exp());
            break;
        }
    }
    let x_50 = x_50.unwrap_or_else(|| {
        // No crossing recorded: fall back to the geometric mean.
        let g = pts.iter().map(|p| p.0.ln()).sum::<f64>() / pts.len() as f64;
        g.exp()
    });
    let x_max = (1.5 * max_size).max(1.2 * x_50);
    [x_50.ln(), (x_max.ln() - x_50.ln()).ln(), 2f64.ln()]
}

/// Small dense damped least-squares loop over 3 parameters with a forward
/// difference Jacobian.
fn levenberg<F>(mut u: [f64; 3], n: usize, mut residuals: F) -> ([f64; 3], f64, bool, usize)
where
    F: FnMut(&[f64; 3], &mut Vec<f64>),
{
    let mut r = Vec::with_capacity(n);
    let mut r_trial = Vec::with_capacity(n);
    let mut jac = vec![[0f64; 3]; n];

    residuals(&u, &mut r);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let mut converged = false;
    let max_iter = 300;
    let mut iter = 0;

    while iter < max_iter {
        iter += 1;
        // Forward-difference Jacobian.
        for j in 0..3 {
            let h = 1e-7 * (1.0 + u[j].abs());
            let mut up = u;
            up[j] += h;
            residuals(&up, &mut r_trial);
            for (i, row) in jac.iter_mut().enumerate() {
                row[j] = (r_trial[i] - r[i]) / h;
            }
        }
        // Normal equations.
        let mut hmat = [[0f64; 3]; 3];
        let mut g = [0f64; 3];
        for (i, row) in jac.iter().enumerate() {
            for a in 0..3 {
                g[a] += row[a] * r[i];
                for b in a..3 {
                    hmat[a][b] += row[a] * row[b];
                }
            }
        }
        for a in 0..3 {
            for b in 0..a {
                hmat[a][b] = hmat[b][a];
            }
        }
        let grad_norm = g.iter().fold(0f64, |m, v| m.max(v.abs()));
        if grad_norm < 1e-14 {
            converged = true;
            break;
        }

        let mut accepted = false;
        for _ in 0..40 {
            let mut damped = hmat;
            for a in 0..3 {
                damped[a][a] += lambda * hmat[a][a].max(1e-12);
            }
            let Some(delta) = solve3(&damped, &[-g[0], -g[1], -g[2]]) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [u[0] + delta[0], u[1] + delta[1], u[2] + delta[2]];
            residuals(&trial, &mut r_trial);
            let trial_cost: f64 = r_trial.iter().map(|v| v * v).sum();
            if trial_cost.is_finite() && trial_cost < cost {
                let step = delta.iter().fold(0f64, |m, v| m.max(v.abs()));
                let improvement = cost - trial_cost;
                u = trial;
                std::mem::swap(&mut r, &mut r_trial);
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if step < 1e-12 || improvement < 1e-18 * (1.0 + cost) {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e14 {
                break;
            }
        }
        if !accepted {
            // No descent direction left; declare convergence if we are at a
            // stationary point of the damped problem.
            converged = grad_norm < 1e-6 * (1.0 + cost);
            break;
        }
        if converged {
            break;
        }
    }
    (u, cost, converged, iter)
}

/// Gaussian elimination with partial pivoting for a 3×3 system.
fn solve3(a: &[[f64; 3]; 3], rhs: &[f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0f64; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = rhs[i];
    }
    for col in 0..3 {
        let mut pivot = col;
        for row in col + 1..3 {
            if m[row][col].abs() > m[pivot][col].abs() {
                pivot = row;
            }
        }
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0f64; 3];
    for i in (0..3).rev() {
        let mut acc = m[i][3];
        for k in i + 1..3 {
            acc -= m[i][k] * x[k];
        }
        x[i] = acc / m[i][i];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> SwebrecParams {
        SwebrecParams::new(19.0, 6.0, 2.0).unwrap()
    }

    #[test]
    fn median_and_max_anchor_points() {
        let p = canonical();
        assert!((swebrec_eval(&p, 6.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((swebrec_eval(&p, 19.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn frozen_value_at_2mm() {
        // High-precision direct evaluation of the formula.
        let p = canonical();
        assert!((swebrec_eval(&p, 2.0).unwrap() - 0.207_702_549_096_961_84).abs() < 1e-12);
    }

    #[test]
    fn domain_error_below_zero() {
        let p = canonical();
        assert!(swebrec_eval(&p, 0.0).is_err());
        assert!(swebrec_eval(&p, -3.0).is_err());
    }

    #[test]
    fn beyond_x_max_saturates_at_one() {
        let p = canonical();
        assert_eq!(swebrec_eval(&p, 25.0).unwrap(), 1.0);
    }

    #[test]
    fn strictly_increasing_on_support() {
        let p = canonical();
        let mut prev = 0.0;
        for i in 1..=400 {
            let x = 19.0 * i as f64 / 400.0;
            let v = swebrec_eval(&p, x).unwrap();
            assert!(v > prev, "not strictly increasing at {x}");
            prev = v;
        }
    }

    #[test]
    fn inverse_matches_forward() {
        let p = canonical();
        for &frac in &[0.05, 0.2077025, 0.5, 0.8, 0.999] {
            let x = swebrec_invert(&p, frac);
            let back = swebrec_eval(&p, x).unwrap();
            assert!((back - frac).abs() < 1e-12, "{frac} -> {x} -> {back}");
        }
    }

    #[test]
    fn noiseless_recovery_within_1e6_relative() {
        let truth = canonical();
        let points: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let x = 1.0 * (19.0f64 / 1.0).powf(i as f64 / 19.0);
                (x, eval_raw(truth.x_max_mm, truth.x_50_mm, truth.b, x))
            })
            .collect();
        let fit = swebrec_fit(&points, None).unwrap();
        assert!(fit.converged);
        assert!((fit.params.x_max_mm / truth.x_max_mm - 1.0).abs() < 1e-6);
        assert!((fit.params.x_50_mm / truth.x_50_mm - 1.0).abs() < 1e-6);
        assert!((fit.params.b / truth.b - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_points_is_too_few() {
        let pts = [(4.0, 0.3), (9.5, 0.7)];
        assert!(matches!(
            swebrec_fit(&pts, None),
            Err(GranulometryError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn duplicate_sizes_do_not_count_as_distinct() {
        let pts = [(4.0, 0.3), (4.0, 0.31), (9.5, 0.7)];
        assert!(matches!(
            swebrec_fit(&pts, None),
            Err(GranulometryError::TooFewPoints { .. })
        ));
    }
}
