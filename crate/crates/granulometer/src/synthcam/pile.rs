//! Pile generation: inverse-CDF size sampling and dart-throwing placement.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::delineation::LabelMap;
use crate::granulometry::{swebrec_invert, DistributionBasis, SwebrecParams};

use super::{PlacedParticle, PlacedSphere, Scene, SceneSpec, SynthError};

const MAX_ATTEMPTS_PER_PARTICLE: u32 = 600;

/// Generates a pile: sieve sizes drawn by inverse-CDF sampling from the
/// target distribution, ellipses placed by dart-throwing with a bounded
/// overlap, deterministic per seed.
pub fn generate_pile(spec: &SceneSpec) -> Result<Scene, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.packing_seed);
    let (w, h) = (spec.width_px(), spec.height_px());
    let n = spec.particle_count as usize;

    // Draw all particle attributes up front so the RNG stream layout is
    // stable regardless of placement retries.
    let sizes: Vec<f64> = match spec.sampling_basis {
        DistributionBasis::Count => {
            let (p_lo, p_hi) = sampling_window(spec)?;
            (0..n)
                .map(|_| {
                    let u = p_lo + rng.random::<f64>() * (p_hi - p_lo);
                    swebrec_invert(&spec.target, u)
                })
                .collect()
        }
        DistributionBasis::VolumeProxy => {
            let sampler = VolumeBasisSampler::new(&spec.target, spec.size_range_mm)?;
            (0..n).map(|_| sampler.draw(rng.random::<f64>())).collect()
        }
    };
    let aspects: Vec<f64> = (0..n)
        .map(|_| rng.random_range(spec.aspect_range.0..=spec.aspect_range.1))
        .collect();
    let orientations: Vec<f64> = (0..n)
        .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
        .collect();
    let albedos: Vec<f64> = (0..n)
        .map(|_| rng.random_range(spec.albedo_range.0..=spec.albedo_range.1))
        .collect();

    // Place big particles first: random sequential adsorption packs far
    // better this way.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sizes[b].partial_cmp(&sizes[a]).expect("finite sizes"));

    let mut occupied = vec![false; w as usize * h as usize];
    let sphere = spec.scale_sphere.map(|s| {
        let sphere = PlacedSphere {
            center_px: (
                s.center_frac.0 * w as f64,
                s.center_frac.1 * h as f64,
            ),
            radius_px: s.diameter_mm / 2.0 / spec.mm_per_px,
            diameter_mm: s.diameter_mm,
        };
        for (x, y) in disc_pixels(sphere.center_px, sphere.radius_px, w, h) {
            occupied[y as usize * w as usize + x as usize] = true;
        }
        sphere
    });

    let mut particles = Vec::with_capacity(n);
    let mut pixels_buf = Vec::new();
    for (placed_so_far, &i) in order.iter().enumerate() {
        let semi_minor = sizes[i] / 2.0 / spec.mm_per_px;
        let semi_major = semi_minor * aspects[i];
        let mut committed = false;
        for _ in 0..MAX_ATTEMPTS_PER_PARTICLE {
            let margin = semi_major;
            let cx = margin + rng.random::<f64>() * (w as f64 - 2.0 * margin).max(1.0);
            let cy = margin + rng.random::<f64>() * (h as f64 - 2.0 * margin).max(1.0);
            ellipse_pixels(
                (cx, cy),
                semi_major,
                semi_minor,
                orientations[i],
                w,
                h,
                &mut pixels_buf,
            );
            let conflicts = pixels_buf
                .iter()
                .filter(|&&(x, y)| occupied[y as usize * w as usize + x as usize])
                .count();
            if conflicts as f64 <= spec.max_overlap * pixels_buf.len().max(1) as f64 {
                for &(x, y) in &pixels_buf {
                    occupied[y as usize * w as usize + x as usize] = true;
                }
                particles.push(PlacedParticle {
                    center_px: (cx, cy),
                    semi_major_px: semi_major,
                    semi_minor_px: semi_minor,
                    orientation_rad: orientations[i],
                    sieve_size_mm: sizes[i],
                    albedo: albedos[i],
                });
                committed = true;
                break;
            }
        }
        if !committed {
            return Err(SynthError::PackingFailure {
                placed: placed_so_far as u32,
                requested: spec.particle_count,
            });
        }
    }

    Ok(Scene {
        spec: spec.clone(),
        width_px: w,
        height_px: h,
        particles,
        sphere,
    })
}

/// Draws sizes so the pile's d³ mass follows the target curve: the count
/// density is the mass density tilted by 1/x³, inverted numerically on a
/// log-size grid.
struct VolumeBasisSampler {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl VolumeBasisSampler {
    fn new(target: &SwebrecParams, size_range: Option<(f64, f64)>) -> Result<Self, SynthError> {
        let (lo, hi) = size_range.unwrap_or((target.x_max_mm * 1e-3, target.x_max_mm));
        let hi = hi.min(target.x_max_mm);
        if !(lo > 0.0 && hi > lo) {
            return Err(SynthError::InvalidSpec(format!(
                "bad size range ({lo}, {hi}) for volume-basis sampling"
            )));
        }
        let n = 2048;
        let mut grid = Vec::with_capacity(n + 1);
        for i in 0..=n {
            grid.push((lo.ln() + (hi.ln() - lo.ln()) * i as f64 / n as f64).exp());
        }
        let mass = |x: f64| {
            crate::granulometry::swebrec_eval(target, x).expect("grid sizes are positive")
        };
        let mut cdf = vec![0.0; n + 1];
        for i in 1..=n {
            let (a, b) = (grid[i - 1], grid[i]);
            let dm = mass(b) - mass(a);
            let xm = (a * b).sqrt();
            cdf[i] = cdf[i - 1] + dm / (xm * xm * xm);
        }
        let total = cdf[n];
        if !(total > 0.0) {
            return Err(SynthError::InvalidSpec(
                "size range has no probability mass".into(),
            ));
        }
        for c in &mut cdf {
            *c /= total;
        }
        Ok(Self { grid, cdf })
    }

    fn draw(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self
            .cdf
            .binary_search_by(|c| c.partial_cmp(&u).expect("finite cdf"))
        {
            Ok(i) => self.grid[i],
            Err(i) => {
                if i == 0 {
                    return self.grid[0];
                }
                if i > self.cdf.len() - 1 {
                    return *self.grid.last().expect("non-empty grid");
                }
                let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
                let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
                // Interpolate in log size to match the grid construction.
                (self.grid[i - 1].ln() + t * (self.grid[i].ln() - self.grid[i - 1].ln())).exp()
            }
        }
    }
}

fn sampling_window(spec: &SceneSpec) -> Result<(f64, f64), SynthError> {
    let eval = |x: f64| {
        crate::granulometry::swebrec_eval(&spec.target, x)
            .map_err(|e| SynthError::Domain(e.to_string()))
    };
    match spec.size_range_mm {
        None => Ok((0.0, 1.0)),
        Some((lo, hi)) => {
            let p_lo = eval(lo)?;
            let p_hi = eval(hi.min(spec.target.x_max_mm))?;
            if !(p_hi > p_lo) {
                return Err(SynthError::InvalidSpec(format!(
                    "size range ({lo}, {hi}) has no probability mass"
                )));
            }
            Ok((p_lo, p_hi))
        }
    }
}

/// Rasterizes the truth label map from the placements. Particles get
/// 1-based labels in placement order; where the packing allowed overlap,
/// the earlier-placed particle keeps the pixel, matching the packing pass.
pub(super) fn rasterize_truth(scene: &Scene) -> LabelMap {
    let (w, h) = (scene.width_px, scene.height_px);
    let mut map = LabelMap::zeros(w, h);
    let mut sphere_mask = vec![false; w as usize * h as usize];
    if let Some(s) = scene.sphere {
        for (x, y) in disc_pixels(s.center_px, s.radius_px, w, h) {
            sphere_mask[y as usize * w as usize + x as usize] = true;
        }
    }
    let mut buf = Vec::new();
    for (idx, p) in scene.particles.iter().enumerate() {
        ellipse_pixels(
            p.center_px,
            p.semi_major_px,
            p.semi_minor_px,
            p.orientation_rad,
            w,
            h,
            &mut buf,
        );
        for &(x, y) in &buf {
            let flat = y as usize * w as usize + x as usize;
            if map.labels[flat] == 0 && !sphere_mask[flat] {
                map.labels[flat] = idx as u32 + 1;
            }
        }
    }
    map
}

/// Integer pixels whose centers fall inside the rotated ellipse.
pub(super) fn ellipse_pixels(
    center: (f64, f64),
    semi_major: f64,
    semi_minor: f64,
    orientation: f64,
    w: u32,
    h: u32,
    out: &mut Vec<(u32, u32)>,
) {
    out.clear();
    let (cx, cy) = center;
    let r = semi_major.max(semi_minor);
    let x0 = (cx - r).floor().max(0.0) as u32;
    let x1 = (cx + r).ceil().min(w as f64 - 1.0) as u32;
    let y0 = (cy - r).floor().max(0.0) as u32;
    let y1 = (cy + r).ceil().min(h as f64 - 1.0) as u32;
    if x0 > x1 || y0 > y1 {
        return;
    }
    let (sin_t, cos_t) = orientation.sin_cos();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let u = (dx * cos_t + dy * sin_t) / semi_major;
            let v = (-dx * sin_t + dy * cos_t) / semi_minor;
            if u * u + v * v <= 1.0 {
                out.push((x, y));
            }
        }
    }
}

pub(super) fn disc_pixels(center: (f64, f64), radius: f64, w: u32, h: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    ellipse_pixels(center, radius, radius, 0.0, w, h, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::granulometry::SwebrecParams;

    fn small_spec(count: u32, seed: u64) -> SceneSpec {
        SceneSpec {
            extent_m: (0.3, 0.2),
            mm_per_px: 0.5,
            target: SwebrecParams::new(19.0, 6.0, 2.0).unwrap(),
            particle_count: count,
            packing_seed: seed,
            size_range_mm: Some((2.0, 19.0)),
            sampling_basis: crate::granulometry::DistributionBasis::Count,
            scale_sphere: None,
            max_overlap: 0.0,
            aspect_range: (1.05, 1.8),
            albedo_range: (0.82, 0.98),
            cap_steepness: 0.75,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = small_spec(120, 42);
        let a = generate_pile(&spec).unwrap();
        let b = generate_pile(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.truth_label_map(), b.truth_label_map());
    }

    #[test]
    fn single_particle_scene_is_a_step() {
        let spec = small_spec(1, 7);
        let scene = generate_pile(&spec).unwrap();
        assert_eq!(scene.particles.len(), 1);
        let d = scene.particles[0].sieve_size_mm;
        let sieves = crate::granulometry::SieveSeries::new(vec![d * 0.99, d * 1.01]).unwrap();
        let dist = crate::synthcam::ground_truth_distribution(&scene, &sieves).unwrap();
        assert_eq!(dist.points[0].percent_passing, 0.0);
        assert!((dist.points[1].percent_passing - 100.0).abs() < 1e-9);
    }

    #[test]
    fn truth_labels_match_particle_count() {
        let spec = small_spec(80, 3);
        let scene = generate_pile(&spec).unwrap();
        let map = scene.truth_label_map();
        let max_label = *map.labels.iter().max().unwrap();
        assert!(max_label as usize <= scene.particles.len());
        // Disjoint packing: every placed particle of visible size has pixels.
        let mut seen = vec![false; scene.particles.len() + 1];
        for &l in &map.labels {
            seen[l as usize] = true;
        }
        let with_pixels = seen.iter().skip(1).filter(|&&s| s).count();
        assert_eq!(with_pixels, scene.particles.len(), "2 mm+ particles all rasterize");
    }

    #[test]
    fn empirical_median_tracks_target_without_truncation() {
        // Sampler check against the untruncated distribution: the drawn
        // median must sit near x_50 = 6 mm.
        let mut spec = small_spec(500, 11);
        spec.size_range_mm = None;
        spec.extent_m = (1.2, 1.2); // room for the occasional huge draw
        let scene = generate_pile(&spec).unwrap();
        let mut sizes = scene.sieve_sizes_mm();
        sizes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sizes[sizes.len() / 2];
        assert!(
            (median - 6.0).abs() / 6.0 < 0.10,
            "median {median} not within 10% of 6 mm"
        );
    }

    #[test]
    fn zero_particles_is_invalid() {
        let mut spec = small_spec(1, 1);
        spec.particle_count = 0;
        assert!(matches!(
            generate_pile(&spec),
            Err(SynthError::InvalidSpec(_))
        ));
    }

    #[test]
    fn impossible_packing_fails() {
        // 200 particles of ~19 mm into a 6 cm square cannot fit disjointly.
        let mut spec = small_spec(200, 5);
        spec.extent_m = (0.06, 0.06);
        spec.size_range_mm = Some((15.0, 19.0));
        assert!(matches!(
            generate_pile(&spec),
            Err(SynthError::PackingFailure { .. })
        ));
    }
}
