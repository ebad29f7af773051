//! From delineated particles to cumulative size distributions.
//!
//! Sieve analysis is mass-based, so each particle contributes a d³ volume
//! proxy, with d the ellipse-minor equivalent sieve size (the aperture a
//! particle passes is governed by its second dimension). Unresolved area
//! contributes through an explicit, swappable fines policy.

use serde::{Deserialize, Serialize};

use crate::delineation::{DelineationNet, Particle, ScaleCalibration};

use super::{
    DistributionBasis, DistributionPoint, DistributionSource, GranulometryError, SieveSeries,
    SizeDistribution,
};

/// How unresolved (label-0) analysis area converts to mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum FinesPolicy {
    /// Unresolved area carries no mass.
    Ignore,
    /// Unresolved area becomes a slab of thickness d_min assigned entirely
    /// below the smallest sieve, where d_min is the equivalent diameter of
    /// `min_particle_area_px`.
    SubSieve { min_particle_area_px: u32 },
}

impl Default for FinesPolicy {
    fn default() -> Self {
        FinesPolicy::SubSieve {
            min_particle_area_px: 9,
        }
    }
}

impl FinesPolicy {
    fn volume_mm3(&self, net: &DelineationNet, cal: &ScaleCalibration) -> f64 {
        match *self {
            FinesPolicy::Ignore => 0.0,
            FinesPolicy::SubSieve {
                min_particle_area_px,
            } => {
                let unresolved_px = net.unresolved_fraction * net.analysis_area_px as f64;
                let d_min_px = 2.0 * (min_particle_area_px as f64 / std::f64::consts::PI).sqrt();
                unresolved_px * cal.mm_per_px * cal.mm_per_px * (d_min_px * cal.mm_per_px)
            }
        }
    }
}

/// Equivalent sieve size of a particle: ellipse minor axis in millimeters.
pub fn equivalent_sieve_size(p: &Particle, cal: &ScaleCalibration) -> f64 {
    p.ellipse_minor * cal.mm_per_px
}

/// Builds a percent-passing distribution over the sieve series from one
/// delineation net.
pub fn build_distribution(
    net: &DelineationNet,
    cal: &ScaleCalibration,
    sieves: &SieveSeries,
    fines: &FinesPolicy,
) -> Result<SizeDistribution, GranulometryError> {
    let pool = pool_volumes(std::iter::once((net, cal)), fines)?;
    distribution_from_pool(&pool, sieves)
}

/// Pools particles and fines mass across an image set before computing
/// percent passing; equivalent to one large net.
pub fn combine_distributions(
    nets_with_cals: &[(&DelineationNet, &ScaleCalibration)],
    sieves: &SieveSeries,
    fines: &FinesPolicy,
) -> Result<SizeDistribution, GranulometryError> {
    if nets_with_cals.is_empty() {
        return Err(GranulometryError::EmptyInput);
    }
    let pool = pool_volumes(nets_with_cals.iter().copied(), fines)?;
    distribution_from_pool(&pool, sieves)
}

/// Builds the distribution straight from true sieve sizes (the generator's
/// ground-truth path); shares the volume-proxy rules used for nets.
pub fn distribution_from_sizes(
    sizes_mm: &[f64],
    sieves: &SieveSeries,
    source: DistributionSource,
) -> Result<SizeDistribution, GranulometryError> {
    if sizes_mm.is_empty() {
        return Err(GranulometryError::EmptyInput);
    }
    let pool = VolumePool {
        sized: sizes_mm.iter().map(|&d| (d, d * d * d)).collect(),
        fines_mm3: 0.0,
    };
    let mut dist = distribution_from_pool(&pool, sieves)?;
    dist.source = source;
    Ok(dist)
}

struct VolumePool {
    /// (equivalent sieve size mm, volume proxy mm³) per particle.
    sized: Vec<(f64, f64)>,
    fines_mm3: f64,
}

fn pool_volumes<'a>(
    items: impl Iterator<Item = (&'a DelineationNet, &'a ScaleCalibration)>,
    fines: &FinesPolicy,
) -> Result<VolumePool, GranulometryError> {
    let mut pool = VolumePool {
        sized: Vec::new(),
        fines_mm3: 0.0,
    };
    let mut any_content = false;
    for (net, cal) in items {
        if !net.particles.is_empty() || net.unresolved_fraction > 0.0 {
            any_content = true;
        }
        for p in &net.particles {
            let d = equivalent_sieve_size(p, cal);
            pool.sized.push((d, d * d * d));
        }
        pool.fines_mm3 += fines.volume_mm3(net, cal);
    }
    if !any_content {
        return Err(GranulometryError::EmptyNet);
    }
    Ok(pool)
}

fn distribution_from_pool(
    pool: &VolumePool,
    sieves: &SieveSeries,
) -> Result<SizeDistribution, GranulometryError> {
    let total: f64 = pool.fines_mm3 + pool.sized.iter().map(|s| s.1).sum::<f64>();
    if !(total > 0.0) {
        return Err(GranulometryError::EmptyNet);
    }
    let points = sieves
        .sizes()
        .iter()
        .map(|&s| {
            let passing: f64 = pool
                .sized
                .iter()
                .filter(|(d, _)| *d <= s)
                .map(|(_, v)| v)
                .sum::<f64>()
                + pool.fines_mm3;
            DistributionPoint {
                size_mm: s,
                percent_passing: 100.0 * passing / total,
            }
        })
        .collect();
    SizeDistribution::new(points, DistributionBasis::VolumeProxy, DistributionSource::ImageAnalysis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delineation::{LabelMap, ScaleMethod};

    fn particle(id: u32, minor_px: f64) -> Particle {
        Particle {
            id,
            area_px: 100,
            centroid: (0.0, 0.0),
            ellipse_major: minor_px * 1.3,
            ellipse_minor: minor_px,
        }
    }

    fn net_of(minors_px: &[f64]) -> DelineationNet {
        DelineationNet {
            label_map: LabelMap::zeros(4, 4),
            particles: minors_px
                .iter()
                .enumerate()
                .map(|(i, &m)| particle(i as u32 + 1, m))
                .collect(),
            unresolved_fraction: 0.0,
            analysis_area_px: 16,
        }
    }

    fn cal(mm_per_px: f64) -> ScaleCalibration {
        ScaleCalibration::new(mm_per_px, ScaleMethod::ManualTrace, 1).unwrap()
    }

    #[test]
    fn sieve_size_is_minor_axis_times_scale() {
        let p = particle(1, 10.0);
        assert_eq!(equivalent_sieve_size(&p, &cal(1.0)), 10.0);
        assert_eq!(equivalent_sieve_size(&p, &cal(0.5)), 5.0);
    }

    #[test]
    fn moment_derived_ellipse_sieve_size() {
        // Oracle: rasterize a solid ellipse with semi-axes (10, 4), compute
        // its moment axes independently, then apply the sieve-size rule.
        let mut pixels = Vec::new();
        for y in 0..40u32 {
            for x in 0..40u32 {
                let dx = (x as f64 - 20.0) / 10.0;
                let dy = (y as f64 - 20.0) / 4.0;
                if dx * dx + dy * dy <= 1.0 {
                    pixels.push((x, y));
                }
            }
        }
        let n = pixels.len() as f64;
        let cx = pixels.iter().map(|p| p.0 as f64).sum::<f64>() / n;
        let cy = pixels.iter().map(|p| p.1 as f64).sum::<f64>() / n;
        let mut mu20 = 0.0;
        let mut mu02 = 0.0;
        for &(x, y) in &pixels {
            mu20 += (x as f64 - cx).powi(2);
            mu02 += (y as f64 - cy).powi(2);
        }
        mu20 = mu20 / n + 1.0 / 12.0;
        mu02 = mu02 / n + 1.0 / 12.0;
        // Rasterization at this scale leaves a few-percent moment error
        // against the continuous minor axis of 8 px.
        let minor_px = 4.0 * mu20.min(mu02).sqrt();
        assert!((minor_px - 8.0).abs() < 0.35, "oracle minor {minor_px}");

        let p = particle(1, minor_px);
        let d = equivalent_sieve_size(&p, &cal(0.25));
        assert_eq!(d, minor_px * 0.25, "rule: minor axis times scale");
        assert!((d - 2.0).abs() < 0.09, "sieve size {d}");
    }

    #[test]
    fn three_particle_hand_case() {
        // d = {3, 10, 15} mm, volumes {27, 1000, 3375}, total 4402.
        let net = net_of(&[3.0, 10.0, 15.0]);
        let sieves = SieveSeries::new(vec![4.0, 12.5, 19.0]).unwrap();
        let d = build_distribution(&net, &cal(1.0), &sieves, &FinesPolicy::Ignore).unwrap();
        let expect = [100.0 * 27.0 / 4402.0, 100.0 * 1027.0 / 4402.0, 100.0];
        for (p, e) in d.points.iter().zip(expect) {
            assert!((p.percent_passing - e).abs() < 1e-9, "{} vs {}", p.percent_passing, e);
        }
        assert!((d.points[0].percent_passing - 0.61).abs() < 0.01);
        assert!((d.points[1].percent_passing - 23.33).abs() < 0.01);
    }

    #[test]
    fn single_particle_step() {
        let net = net_of(&[10.0]);
        let sieves = SieveSeries::new(vec![4.0, 19.0]).unwrap();
        let d = build_distribution(&net, &cal(1.0), &sieves, &FinesPolicy::Ignore).unwrap();
        assert_eq!(d.points[0].percent_passing, 0.0);
        assert_eq!(d.points[1].percent_passing, 100.0);
    }

    #[test]
    fn empty_net_is_an_error() {
        let net = net_of(&[]);
        let sieves = SieveSeries::default();
        assert!(matches!(
            build_distribution(&net, &cal(1.0), &sieves, &FinesPolicy::default()),
            Err(GranulometryError::EmptyNet)
        ));
    }

    #[test]
    fn combining_duplicate_nets_preserves_fractions() {
        let net = net_of(&[3.0, 10.0, 15.0]);
        let c = cal(1.0);
        let sieves = SieveSeries::new(vec![4.0, 12.5, 19.0]).unwrap();
        let single = build_distribution(&net, &c, &sieves, &FinesPolicy::Ignore).unwrap();
        let both =
            combine_distributions(&[(&net, &c), (&net, &c)], &sieves, &FinesPolicy::Ignore).unwrap();
        for (a, b) in single.points.iter().zip(&both.points) {
            assert!((a.percent_passing - b.percent_passing).abs() < 1e-12);
        }
    }

    #[test]
    fn combining_pools_across_nets() {
        // Net A {3 mm}, net B {15 mm}: P(<4) = 100·27/3402.
        let a = net_of(&[3.0]);
        let b = net_of(&[15.0]);
        let c = cal(1.0);
        let sieves = SieveSeries::new(vec![4.0, 19.0]).unwrap();
        let d = combine_distributions(&[(&a, &c), (&b, &c)], &sieves, &FinesPolicy::Ignore).unwrap();
        let expect = 100.0 * 27.0 / 3402.0;
        assert!((d.points[0].percent_passing - expect).abs() < 1e-9);
        assert!((d.points[0].percent_passing - 0.79).abs() < 0.01);
    }

    #[test]
    fn empty_list_is_empty_input() {
        let sieves = SieveSeries::default();
        assert!(matches!(
            combine_distributions(&[], &sieves, &FinesPolicy::default()),
            Err(GranulometryError::EmptyInput)
        ));
    }

    #[test]
    fn fines_mass_lands_below_smallest_sieve() {
        let mut net = net_of(&[10.0]);
        net.unresolved_fraction = 0.5;
        net.analysis_area_px = 1000;
        let sieves = SieveSeries::new(vec![4.0, 19.0]).unwrap();
        let policy = FinesPolicy::SubSieve {
            min_particle_area_px: 9,
        };
        let d = build_distribution(&net, &cal(1.0), &sieves, &policy).unwrap();
        assert!(d.points[0].percent_passing > 0.0, "fines must count below 4 mm");
        assert_eq!(d.points[1].percent_passing, 100.0);
    }

    #[test]
    fn scale_linearity() {
        // Doubling mm_per_px doubles every sieve size: percent passing at
        // correspondingly scaled sieves is unchanged.
        let net = net_of(&[3.0, 10.0, 15.0]);
        let sieves1 = SieveSeries::new(vec![4.0, 12.5, 19.0]).unwrap();
        let sieves2 = SieveSeries::new(vec![8.0, 25.0, 38.0]).unwrap();
        let d1 = build_distribution(&net, &cal(1.0), &sieves1, &FinesPolicy::Ignore).unwrap();
        let d2 = build_distribution(&net, &cal(2.0), &sieves2, &FinesPolicy::Ignore).unwrap();
        for (a, b) in d1.points.iter().zip(&d2.points) {
            assert!((a.percent_passing - b.percent_passing).abs() < 1e-12);
        }
    }
}
