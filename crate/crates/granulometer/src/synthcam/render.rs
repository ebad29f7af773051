//! Lambertian rendering of a scene under a lighting condition and sensor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::io::Raster;

use super::pile::{disc_pixels, ellipse_pixels};
use super::{LightingCondition, Scene, SensorModel, SynthError};

/// Fixed source azimuth: shadows fall along this direction.
const AZIMUTH_DEG: f64 = 30.0;
/// Dark bench/ground reflectance relative to the rocks.
const BACKGROUND_ALBEDO: f64 = 0.05;

/// Renders the scene:
/// pixel = clamp(round(gain × illuminance × albedo × shading × field + noise)).
/// Deterministic per (scene, light, sensor) including the sensor seed.
pub fn render(
    scene: &Scene,
    light: &LightingCondition,
    sensor: &SensorModel,
) -> Result<Raster, SynthError> {
    light.validate()?;
    if !(sensor.exposure_gain > 0.0) || !(sensor.noise_floor_sigma >= 0.0) {
        return Err(SynthError::Domain(format!(
            "bad sensor model: gain {}, sigma {}",
            sensor.exposure_gain, sensor.noise_floor_sigma
        )));
    }
    let (w, h) = (scene.width_px, scene.height_px);
    let n = w as usize * h as usize;

    let field = illumination_field(scene, light);
    let shaded = shading_map(scene, light);

    let mut rng = ChaCha8Rng::seed_from_u64(sensor.rng_seed);
    let sigma = sensor.noise_floor_sigma;
    // Clipped so a zero-signal frame stays within 3σ after rounding.
    let clip = (3.0 * sigma - 0.5).max(0.0);
    let normal = if sigma > 0.0 {
        Some(Normal::new(0.0, sigma).expect("positive sigma"))
    } else {
        None
    };

    let gain_e = sensor.exposure_gain * light.pile_illuminance_lx;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let signal = gain_e * shaded[i] as f64 * field[i] as f64;
        let noise = normal
            .as_ref()
            .map_or(0.0, |d| d.sample(&mut rng).clamp(-clip, clip));
        let v = (signal + noise).round().clamp(0.0, sensor.full_well as f64);
        samples.push(v as u8);
    }
    Ok(Raster::new(w, h, samples).expect("dimensions match"))
}

/// Per-pixel albedo × Lambertian shading. Particles carry hemispherical-cap
/// normals; the scale sphere renders as a uniform bright disc; background
/// is dark bench material.
fn shading_map(scene: &Scene, light: &LightingCondition) -> Vec<f32> {
    let (w, h) = (scene.width_px, scene.height_px);
    let mut out = vec![BACKGROUND_ALBEDO as f32; w as usize * h as usize];

    let az = AZIMUTH_DEG.to_radians();
    let tilt = light.source_tilt_deg.to_radians();
    // Unit vector toward the light; tilt 0 is overhead.
    let l = (
        -tilt.sin() * az.cos(),
        -tilt.sin() * az.sin(),
        tilt.cos(),
    );

    let k = scene.spec.cap_steepness.clamp(0.05, 1.0);
    let mut buf = Vec::new();
    for p in &scene.particles {
        ellipse_pixels(
            p.center_px,
            p.semi_major_px,
            p.semi_minor_px,
            p.orientation_rad,
            w,
            h,
            &mut buf,
        );
        let (sin_t, cos_t) = p.orientation_rad.sin_cos();
        for &(x, y) in &buf {
            let dx = x as f64 - p.center_px.0;
            let dy = y as f64 - p.center_px.1;
            let u = (dx * cos_t + dy * sin_t) / p.semi_major_px;
            let v = (-dx * sin_t + dy * cos_t) / p.semi_minor_px;
            let rho2 = (u * u + v * v).min(1.0);
            // Flattened cap normal: unit by construction since
            // k²u² + k²v² + (1 − k²ρ²) = 1.
            let nx = k * (u * cos_t - v * sin_t);
            let ny = k * (u * sin_t + v * cos_t);
            let nz = (1.0 - k * k * rho2).max(0.0).sqrt();
            let lambert = (nx * l.0 + ny * l.1 + nz * l.2).max(0.0);
            out[y as usize * w as usize + x as usize] = (p.albedo * lambert) as f32;
        }
    }
    if let Some(s) = scene.sphere {
        for (x, y) in disc_pixels(s.center_px, s.radius_px, w, h) {
            out[y as usize * w as usize + x as usize] = 1.0;
        }
    }
    out
}

/// The illumination evenness field, normalized to mean 1.
///
/// At evenness 1 the field is spatially constant. Severity s = 1 − evenness
/// drives a low-order gradient along the source azimuth plus hard cast
/// shadows opposite the source, so the field's coefficient of variation
/// strictly grows as evenness drops.
pub fn illumination_field(scene: &Scene, light: &LightingCondition) -> Vec<f32> {
    let (w, h) = (scene.width_px, scene.height_px);
    let n = w as usize * h as usize;
    let s = 1.0 - light.evenness;
    if s <= 0.0 {
        return vec![1.0; n];
    }

    let az = AZIMUTH_DEG.to_radians();
    let dir = (az.cos(), az.sin());
    let span = (w as f64 * dir.0.abs() + h as f64 * dir.1.abs()).max(1.0);

    // Low-order gradient away from the light.
    let mut field = vec![0f32; n];
    for y in 0..h as usize {
        for x in 0..w as usize {
            let proj = (x as f64 * dir.0 + y as f64 * dir.1) / span;
            field[y * w as usize + x] = (1.0 - 0.5 * s * proj.clamp(0.0, 1.0)) as f32;
        }
    }

    // Hard cast shadows: each body dims an offset copy of itself, sparing
    // only its own pixels; shadows landing on neighbors stay. Reach and
    // depth both grow with severity, so neighbor boundaries drown long
    // before the frame goes dark.
    let atten = (1.0 - 0.9 * s) as f32;
    let mut shadow = vec![false; n];
    let mut cast = Vec::new();
    let mut mark_shadow = |center: (f64, f64),
                           a: f64,
                           b: f64,
                           theta: f64,
                           shadow: &mut Vec<bool>| {
        let reach = (0.6 + 3.0 * s) * b;
        let offset = (center.0 + reach * dir.0, center.1 + reach * dir.1);
        let grow = 1.0 + 0.3 * s;
        ellipse_pixels(offset, a * grow, b * grow, theta, w, h, &mut cast);
        let (sin_t, cos_t) = theta.sin_cos();
        for &(x, y) in &cast {
            // The caster does not shadow itself; its lee-side darkness
            // comes from the Lambertian term.
            let dx = x as f64 - center.0;
            let dy = y as f64 - center.1;
            let u = (dx * cos_t + dy * sin_t) / a;
            let v = (-dx * sin_t + dy * cos_t) / b;
            if u * u + v * v > 1.0 {
                shadow[y as usize * w as usize + x as usize] = true;
            }
        }
    };
    for p in &scene.particles {
        mark_shadow(
            p.center_px,
            p.semi_major_px,
            p.semi_minor_px,
            p.orientation_rad,
            &mut shadow,
        );
    }
    if let Some(sph) = scene.sphere {
        mark_shadow(sph.center_px, sph.radius_px, sph.radius_px, 0.0, &mut shadow);
    }
    for i in 0..n {
        if shadow[i] {
            field[i] *= atten;
        }
    }

    // Normalize to mean 1 so evenness changes redistribute light instead of
    // dimming the pile: comparisons stay at matched mean illuminance.
    let mean: f64 = field.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    let inv = (1.0 / mean) as f32;
    for v in &mut field {
        *v *= inv;
    }
    field
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::granulometry::SwebrecParams;
    use crate::synthcam::{generate_pile, SceneSpec};

    fn test_scene(seed: u64) -> Scene {
        let spec = SceneSpec {
            extent_m: (0.2, 0.15),
            mm_per_px: 0.5,
            target: SwebrecParams::new(19.0, 6.0, 2.0).unwrap(),
            particle_count: 60,
            packing_seed: seed,
            size_range_mm: Some((2.0, 19.0)),
            sampling_basis: crate::granulometry::DistributionBasis::Count,
            scale_sphere: None,
            max_overlap: 0.0,
            aspect_range: (1.05, 1.8),
            albedo_range: (0.82, 0.98),
            cap_steepness: 0.75,
        };
        generate_pile(&spec).unwrap()
    }

    fn sensor(seed: u64) -> SensorModel {
        SensorModel {
            rng_seed: seed,
            ..SensorModel::default()
        }
    }

    #[test]
    fn zero_illuminance_stays_within_noise_floor() {
        let scene = test_scene(1);
        let light = LightingCondition::even("off", 0.0);
        let r = render(&scene, &light, &sensor(9)).unwrap();
        let limit = 3.0 * SensorModel::default().noise_floor_sigma;
        for &v in r.samples() {
            assert!((v as f64) <= limit, "pixel {v} above 3 sigma {limit}");
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let scene = test_scene(2);
        let light = LightingCondition::even("normal", 450.0);
        let a = render(&scene, &light, &sensor(4)).unwrap();
        let b = render(&scene, &light, &sensor(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn brighter_light_means_brighter_pixels() {
        let scene = test_scene(3);
        let mean = |lux: f64| {
            let r = render(&scene, &LightingCondition::even("x", lux), &sensor(5)).unwrap();
            r.samples().iter().map(|&v| v as f64).sum::<f64>() / r.samples().len() as f64
        };
        // Table 1 experiments 1 and 4: 450 lx vs 11 lx.
        assert!(mean(450.0) > mean(11.0));
        // Monotone across the full lighting table.
        let means: Vec<f64> = [3.0, 11.0, 14.0, 18.0, 40.0, 120.0, 450.0]
            .iter()
            .map(|&l| mean(l))
            .collect();
        for w in means.windows(2) {
            assert!(w[1] >= w[0], "mean luminance must be non-decreasing: {means:?}");
        }
    }

    #[test]
    fn even_field_is_constant_and_unevenness_grows_cv() {
        let scene = test_scene(4);
        let cv = |evenness: f64| {
            let mut light = LightingCondition::even("x", 40.0);
            light.evenness = evenness;
            let f = illumination_field(&scene, &light);
            let n = f.len() as f64;
            let mean: f64 = f.iter().map(|&v| v as f64).sum::<f64>() / n;
            let var: f64 = f.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
            (var.sqrt() / mean, mean)
        };
        let (cv1, mean1) = cv(1.0);
        assert_eq!(cv1, 0.0, "evenness 1 must be spatially constant");
        assert!((mean1 - 1.0).abs() < 1e-6);
        let mut prev = cv1;
        for e in [0.8, 0.6, 0.4, 0.2] {
            let (c, m) = cv(e);
            assert!(c > prev, "CV must strictly grow as evenness drops");
            assert!((m - 1.0).abs() < 1e-4, "mean illuminance stays matched");
            prev = c;
        }
    }
}
