//! `plan`: the nine-image flight plan over a pile polygon.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use granulometer::missionplan::{
    footprint, ground_sample_distance, max_pairwise_overlap, plan_flight, CameraModel,
    PlanOptions, Quad,
};

use crate::report;

#[derive(Serialize)]
struct PlanExport {
    pile_polygon: Vec<(f64, f64)>,
    waypoints: Vec<WaypointExport>,
    footprints: Vec<Quad>,
    max_pairwise_overlap: f64,
    gsd_mm_per_px: f64,
}

#[derive(Serialize)]
struct WaypointExport {
    idx: usize,
    x_m: f64,
    y_m: f64,
    z_m: f64,
    tilt_deg: f64,
}

pub fn run(polygon_path: &Path, altitude_m: f64, tilt_deg: f64, out: &Path) -> Result<u8> {
    let polygon = read_polygon(polygon_path)?;
    let cam = CameraModel::default();
    let plan = plan_flight(&polygon, altitude_m, tilt_deg, &cam, &PlanOptions::default())
        .map_err(|e| anyhow::anyhow!("{e}"))?;

    let footprints: Vec<Quad> = plan
        .waypoints
        .iter()
        .map(|wp| footprint(&cam, wp).map_err(|e| anyhow::anyhow!("{e}")))
        .collect::<Result<_>>()?;
    let worst = max_pairwise_overlap(&footprints);

    std::fs::create_dir_all(out)?;
    let mut csv = String::from("idx,x_m,y_m,z_m,tilt_deg\n");
    let mut waypoints = Vec::new();
    for (idx, wp) in plan.waypoints.iter().enumerate() {
        csv.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.3}\n",
            idx, wp.position.0, wp.position.1, wp.position.2, wp.camera_tilt_deg
        ));
        waypoints.push(WaypointExport {
            idx,
            x_m: wp.position.0,
            y_m: wp.position.1,
            z_m: wp.position.2,
            tilt_deg: wp.camera_tilt_deg,
        });
    }
    report::write_text(&out.join("plan.csv"), &csv)?;
    report::write_json(
        &out.join("footprints.json"),
        &PlanExport {
            pile_polygon: plan.pile_polygon.clone(),
            waypoints,
            footprints,
            max_pairwise_overlap: worst,
            gsd_mm_per_px: ground_sample_distance(&cam, altitude_m),
        },
    )?;
    println!("max pairwise footprint overlap: {worst:.4}");
    Ok(0)
}

fn read_polygon(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("x_m") {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let x: f64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .with_context(|| format!("{}:{}: bad x", path.display(), idx + 1))?;
        let y: f64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .with_context(|| format!("{}:{}: bad y", path.display(), idx + 1))?;
        points.push((x, y));
    }
    if points.is_empty() {
        anyhow::bail!("{}: no polygon vertices", path.display());
    }
    Ok(points)
}
