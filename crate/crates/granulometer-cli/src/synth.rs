//! `synth`: render a seeded synthetic dataset, one image set per lighting
//! condition.
//!
//! The nine capture viewpoints are realized as deterministic crops of the
//! master render with small seeded jitter, matching the near-perpendicular
//! planar-pile capture geometry. All randomness derives from the single
//! command-line seed.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use granulometer::granulometry::SieveSeries;
use granulometer::io::{
    encode_label_map_pgm16, encode_raster, write_scale_annotation, RasterFormat, TracedCircle,
};
use granulometer::synthcam::{
    generate_pile, ground_truth_distribution, render, Scene, SceneSpec, SensorModel,
};

use crate::config::{load_synth_config, SynthConfig};
use crate::report;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewPlacement {
    pub name: String,
    pub x0: u32,
    pub y0: u32,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub mm_per_px: f64,
    pub sieves: Vec<f64>,
    pub views: Vec<ViewPlacement>,
    pub conditions: Vec<ConditionEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub label: String,
    pub dir: String,
    pub pile_illuminance_lx: f64,
    pub evenness: f64,
    pub sensor_seed: u64,
}

pub fn run(config_path: &Path, seed: u64, out: &Path) -> Result<u8> {
    let cfg = load_synth_config(config_path)?;
    let started = std::time::Instant::now();

    let scene = build_scene(&cfg, seed)?;
    let views = place_views(&cfg, &scene, seed);

    std::fs::create_dir_all(out.join("truth"))?;
    std::fs::create_dir_all(out.join("annotations"))?;
    std::fs::create_dir_all(out.join("conditions"))?;

    report::write_text(&out.join("scene.json"), &scene.to_json())?;

    // Ground-truth label maps: master plus one per view.
    let truth = scene.truth_label_map();
    let master_pgm = encode_label_map_pgm16(truth.width, truth.height, &truth.labels)
        .map_err(|e| anyhow::anyhow!("truth map: {e}"))?;
    std::fs::write(out.join("truth/labels_full.pgm"), master_pgm)?;
    for v in &views {
        let crop = truth.crop(v.x0, v.y0, v.width, v.height);
        let bytes = encode_label_map_pgm16(crop.width, crop.height, &crop.labels)
            .map_err(|e| anyhow::anyhow!("truth map {}: {e}", v.name))?;
        std::fs::write(out.join(format!("truth/labels_{}.pgm", v.name)), bytes)?;
    }

    let sieves = SieveSeries::new(cfg.sieves.clone()).map_err(|e| anyhow::anyhow!("{e}"))?;
    let truth_dist = ground_truth_distribution(&scene, &sieves)
        .map_err(|e| anyhow::anyhow!("truth distribution: {e}"))?;
    report::write_text(
        &out.join("truth/truth_distribution.csv"),
        &report::distribution_csv(&truth_dist.points),
    )?;

    // Scale annotations: the traced circle of the sphere, per view where it
    // shows up, in view-local pixel coordinates.
    if let Some(sphere) = scene.sphere {
        for v in &views {
            if !disc_intersects_rect(
                sphere.center_px,
                sphere.radius_px,
                (v.x0 as f64, v.y0 as f64),
                (v.width as f64, v.height as f64),
            ) {
                continue;
            }
            let circle = TracedCircle {
                center: (
                    sphere.center_px.0 - v.x0 as f64,
                    sphere.center_px.1 - v.y0 as f64,
                ),
                radius_px: sphere.radius_px,
                diameter_mm: sphere.diameter_mm,
            };
            report::write_text(
                &out.join(format!("annotations/{}.csv", v.name)),
                &write_scale_annotation(&[circle]),
            )?;
        }
    }

    // Renders: one image set per lighting condition.
    let mut conditions = Vec::new();
    for (idx, light) in cfg.lighting.iter().enumerate() {
        let dir_name = sanitize(&light.label);
        let dir = out.join("conditions").join(&dir_name);
        std::fs::create_dir_all(&dir)?;
        let sensor_seed = splitmix64(seed ^ 0x5EED_5EED, idx as u64 + 1);
        let sensor = SensorModel {
            exposure_gain: cfg.sensor.exposure_gain,
            noise_floor_sigma: cfg.sensor.noise_floor_sigma,
            full_well: 255,
            rng_seed: sensor_seed,
        };
        let master = render(&scene, light, &sensor).map_err(|e| anyhow::anyhow!("{e}"))?;
        for v in &views {
            let crop = master.crop(v.x0, v.y0, v.width, v.height);
            std::fs::write(
                dir.join(format!("{}.pgm", v.name)),
                encode_raster(&crop, RasterFormat::Pgm),
            )?;
        }
        report::write_json(&dir.join("lighting.json"), light)?;
        conditions.push(ConditionEntry {
            label: light.label.clone(),
            dir: format!("conditions/{dir_name}"),
            pile_illuminance_lx: light.pile_illuminance_lx,
            evenness: light.evenness,
            sensor_seed,
        });
    }

    let manifest = DatasetManifest {
        seed,
        mm_per_px: cfg.scene.mm_per_px,
        sieves: cfg.sieves.clone(),
        views,
        conditions,
    };
    report::write_json(&out.join("manifest.json"), &manifest)?;

    eprintln!(
        "synth: {} particles, {} conditions in {:.2?}",
        scene.particles.len(),
        cfg.lighting.len(),
        started.elapsed()
    );
    Ok(0)
}

fn build_scene(cfg: &SynthConfig, seed: u64) -> Result<Scene> {
    let (master_w, master_h) = master_dims(&cfg.views);
    let spec = SceneSpec {
        extent_m: (
            master_w as f64 * cfg.scene.mm_per_px / 1000.0,
            master_h as f64 * cfg.scene.mm_per_px / 1000.0,
        ),
        mm_per_px: cfg.scene.mm_per_px,
        target: cfg.scene.target,
        particle_count: cfg.scene.particle_count,
        packing_seed: splitmix64(seed, 0),
        size_range_mm: cfg.scene.size_range_mm,
        sampling_basis: cfg.scene.sampling_basis,
        scale_sphere: cfg.scene.scale_sphere,
        max_overlap: cfg.scene.max_overlap,
        aspect_range: cfg.scene.aspect_range,
        albedo_range: cfg.scene.albedo_range,
    };
    generate_pile(&spec).map_err(|e| anyhow::anyhow!("{e}"))
}

fn master_dims(views: &crate::config::ViewConfig) -> (u32, u32) {
    (
        3 * views.width_px + 2 * views.jitter_px,
        3 * views.height_px + 2 * views.jitter_px,
    )
}

/// 3×3 crop placements with seeded jitter, identical for every condition so
/// truth maps align with all renders.
fn place_views(cfg: &SynthConfig, scene: &Scene, seed: u64) -> Vec<ViewPlacement> {
    let v = &cfg.views;
    let (master_w, master_h) = (scene.width_px, scene.height_px);
    let mut views = Vec::with_capacity(9);
    for row in 0..3u32 {
        for col in 0..3u32 {
            let idx = row * 3 + col;
            let jx = jitter(splitmix64(seed ^ 0x0A11CE, idx as u64 * 2), v.jitter_px);
            let jy = jitter(splitmix64(seed ^ 0x0A11CE, idx as u64 * 2 + 1), v.jitter_px);
            let x0 = (v.jitter_px as i64 + col as i64 * v.width_px as i64 + jx)
                .clamp(0, (master_w - v.width_px) as i64) as u32;
            let y0 = (v.jitter_px as i64 + row as i64 * v.height_px as i64 + jy)
                .clamp(0, (master_h - v.height_px) as i64) as u32;
            views.push(ViewPlacement {
                name: format!("view_{idx:02}"),
                x0,
                y0,
                width: v.width_px,
                height: v.height_px,
            });
        }
    }
    views
}

fn jitter(bits: u64, amplitude_px: u32) -> i64 {
    if amplitude_px == 0 {
        return 0;
    }
    let span = 2 * amplitude_px as i64 + 1;
    (bits % span as u64) as i64 - amplitude_px as i64
}

fn disc_intersects_rect(center: (f64, f64), radius: f64, origin: (f64, f64), size: (f64, f64)) -> bool {
    let nearest_x = center.0.clamp(origin.0, origin.0 + size.0 - 1.0);
    let nearest_y = center.1.clamp(origin.1, origin.1 + size.1 - 1.0);
    let dx = center.0 - nearest_x;
    let dy = center.1 - nearest_y;
    dx * dx + dy * dy <= radius * radius
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

pub fn splitmix64(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn manifest_path(dataset: &Path) -> PathBuf {
    dataset.join("manifest.json")
}

pub fn load_manifest(dataset: &Path) -> Result<DatasetManifest> {
    let path = manifest_path(dataset);
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
