//! Nine-image capture geometry over a pile footprint.
//!
//! The pile surface is modeled as the plane z = 0. Camera tilt is measured
//! from horizontal, so tilt 90° looks straight down; the viewing azimuth is
//! fixed along +x. Waypoints sit on a 3×3 grid over the pile polygon's
//! bounding box, spaced so pairwise footprint overlap stays within the
//! overlap budget.

mod clip;

pub use clip::{clip_convex, polygon_area};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub h_fov_deg: f64,
    pub v_fov_deg: f64,
    pub width_px: u32,
    pub height_px: u32,
    pub max_tilt_deg: f64,
}

impl Default for CameraModel {
    /// 856×480 stream with a configured 56°/43° field of view and the 83°
    /// tilt ceiling.
    fn default() -> Self {
        Self {
            h_fov_deg: 56.0,
            v_fov_deg: 43.0,
            width_px: 856,
            height_px: 480,
            max_tilt_deg: 83.0,
        }
    }
}

impl CameraModel {
    fn validate(&self) -> Result<(), PlanError> {
        let ok = |f: f64| f > 0.0 && f < 180.0;
        if !ok(self.h_fov_deg) || !ok(self.v_fov_deg) || self.max_tilt_deg > 90.0 {
            return Err(PlanError::Domain(format!(
                "invalid camera model: fov {}x{}, max tilt {}",
                self.h_fov_deg, self.v_fov_deg, self.max_tilt_deg
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    /// (x m, y m, z m above the pile surface).
    pub position: (f64, f64, f64),
    pub camera_tilt_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightPlan {
    pub waypoints: Vec<Waypoint>,
    pub pile_polygon: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanOptions {
    /// "No or little image overlap": the largest accepted pairwise
    /// footprint overlap fraction.
    pub overlap_budget: f64,
    /// Minimum fraction of the pile the 9 footprints must cover.
    pub coverage_floor: f64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            overlap_budget: 0.10,
            coverage_floor: 0.25,
        }
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("requested tilt {requested}° exceeds camera limit {limit}°")]
    TiltExceedsLimit { requested: f64, limit: f64 },
    #[error("pile polygon is degenerate: {0}")]
    PolygonDegenerate(String),
    #[error("coverage infeasible: {0}")]
    CoverageInfeasible(String),
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Quad = [(f64, f64); 4];

/// Projects the view frustum's corner rays onto the pile plane.
///
/// Corners come out in cyclic order, so the quadrilateral is convex by
/// construction. Errors if any frustum ray points level or upward.
pub fn footprint(cam: &CameraModel, wp: &Waypoint) -> Result<Quad, PlanError> {
    cam.validate()?;
    let (x0, y0, z0) = wp.position;
    if z0 <= 0.0 {
        return Err(PlanError::Domain(format!("altitude must be positive, got {z0}")));
    }
    let tilt = wp.camera_tilt_deg.to_radians();
    let th = (cam.h_fov_deg.to_radians() / 2.0).tan();
    let tv = (cam.v_fov_deg.to_radians() / 2.0).tan();

    // Camera basis: forward pitched down by tilt from horizontal along +x,
    // right along +y, up completing the frame.
    let fwd = (tilt.cos(), 0.0, -tilt.sin());
    let right = (0.0, 1.0, 0.0);
    let up = (tilt.sin(), 0.0, tilt.cos());

    let mut quad = [(0.0, 0.0); 4];
    // Cyclic corner order: (-h,-v), (+h,-v), (+h,+v), (-h,+v).
    let corners = [(-th, -tv), (th, -tv), (th, tv), (-th, tv)];
    for (i, (ch, cv)) in corners.into_iter().enumerate() {
        let d = (
            fwd.0 + ch * right.0 + cv * up.0,
            fwd.1 + ch * right.1 + cv * up.1,
            fwd.2 + ch * right.2 + cv * up.2,
        );
        if d.2 >= -1e-12 {
            return Err(PlanError::Domain(format!(
                "frustum ray {i} does not intersect the pile plane (tilt {}°)",
                wp.camera_tilt_deg
            )));
        }
        let s = z0 / -d.2;
        quad[i] = (x0 + s * d.0, y0 + s * d.1);
    }
    Ok(quad)
}

/// area(a ∩ b) / min(area(a), area(b)) via convex polygon clipping.
pub fn overlap_fraction(a: &Quad, b: &Quad) -> f64 {
    let pa = orient_ccw(a.to_vec());
    let pb = orient_ccw(b.to_vec());
    let area_a = polygon_area(&pa);
    let area_b = polygon_area(&pb);
    let min_area = area_a.min(area_b);
    if min_area <= 0.0 {
        return 0.0;
    }
    let inter = clip_convex(&pa, &pb);
    if inter.len() < 3 {
        return 0.0;
    }
    (polygon_area(&inter) / min_area).clamp(0.0, 1.0)
}

/// Physical size of one pixel on the subject plane, in mm/px.
pub fn ground_sample_distance(cam: &CameraModel, distance_m: f64) -> f64 {
    2.0 * distance_m * (cam.h_fov_deg.to_radians() / 2.0).tan() / cam.width_px as f64 * 1000.0
}

/// Plans the nine-image capture over a pile polygon: a 3×3 grid aligned
/// to the polygon's bounding box, all waypoints at the same altitude and
/// tilt. Grid pitch starts from the bounding box and widens if needed
/// until pairwise overlap meets the budget.
pub fn plan_flight(
    pile_polygon: &[(f64, f64)],
    altitude_m: f64,
    tilt_deg: f64,
    cam: &CameraModel,
    opts: &PlanOptions,
) -> Result<FlightPlan, PlanError> {
    cam.validate()?;
    if tilt_deg > cam.max_tilt_deg {
        return Err(PlanError::TiltExceedsLimit {
            requested: tilt_deg,
            limit: cam.max_tilt_deg,
        });
    }
    if altitude_m <= 0.0 {
        return Err(PlanError::Domain(format!(
            "altitude must be positive, got {altitude_m}"
        )));
    }
    let hull = convex_hull(pile_polygon);
    if hull.len() < 3 || polygon_area(&hull) < 1e-12 {
        return Err(PlanError::PolygonDegenerate(format!(
            "need >= 3 non-collinear vertices, got {} usable",
            hull.len()
        )));
    }

    let (min_x, max_x) = bounds(pile_polygon, |p| p.0);
    let (min_y, max_y) = bounds(pile_polygon, |p| p.1);
    let mut pitch_x = (max_x - min_x) / 3.0;
    let mut pitch_y = (max_y - min_y) / 3.0;
    let center = ((min_x + max_x) / 2.0, (min_y + max_y) / 2.0);

    let wp_at = |x: f64, y: f64| Waypoint {
        position: (x, y, altitude_m),
        camera_tilt_deg: tilt_deg,
    };

    // Widen the pitch until every footprint pair meets the overlap budget.
    let mut waypoints = Vec::new();
    let mut footprints: Vec<Quad> = Vec::new();
    for _ in 0..64 {
        waypoints.clear();
        footprints.clear();
        for row in 0..3 {
            for col in 0..3 {
                let x = center.0 + (col as f64 - 1.0) * pitch_x;
                let y = center.1 + (row as f64 - 1.0) * pitch_y;
                let wp = wp_at(x, y);
                footprints.push(footprint(cam, &wp)?);
                waypoints.push(wp);
            }
        }
        let worst = max_pairwise_overlap(&footprints);
        if worst <= opts.overlap_budget {
            break;
        }
        pitch_x *= 1.08;
        pitch_y *= 1.08;
    }
    if max_pairwise_overlap(&footprints) > opts.overlap_budget {
        return Err(PlanError::CoverageInfeasible(
            "could not find a 3x3 spacing within the overlap budget".into(),
        ));
    }

    // Every footprint must still intersect the pile.
    for (i, f) in footprints.iter().enumerate() {
        let inter = clip_convex(&orient_ccw(f.to_vec()), &hull);
        if inter.len() < 3 || polygon_area(&inter) <= 0.0 {
            return Err(PlanError::CoverageInfeasible(format!(
                "footprint {i} does not intersect the pile polygon"
            )));
        }
    }

    // Coverage check on a deterministic sample grid over the pile.
    let covered = coverage_fraction(&hull, &footprints, (min_x, max_x), (min_y, max_y));
    if covered < opts.coverage_floor {
        return Err(PlanError::CoverageInfeasible(format!(
            "nine footprints cover {:.1}% of the pile, below the {:.0}% floor \
             (pile too large for this altitude)",
            covered * 100.0,
            opts.coverage_floor * 100.0
        )));
    }

    Ok(FlightPlan {
        waypoints,
        pile_polygon: pile_polygon.to_vec(),
    })
}

/// Largest pairwise footprint overlap in a plan.
pub fn max_pairwise_overlap(footprints: &[Quad]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..footprints.len() {
        for j in i + 1..footprints.len() {
            worst = worst.max(overlap_fraction(&footprints[i], &footprints[j]));
        }
    }
    worst
}

fn coverage_fraction(
    hull: &[(f64, f64)],
    footprints: &[Quad],
    (min_x, max_x): (f64, f64),
    (min_y, max_y): (f64, f64),
) -> f64 {
    let n = 64;
    let mut inside = 0u32;
    let mut covered = 0u32;
    for i in 0..n {
        for j in 0..n {
            let p = (
                min_x + (max_x - min_x) * (i as f64 + 0.5) / n as f64,
                min_y + (max_y - min_y) * (j as f64 + 0.5) / n as f64,
            );
            if !point_in_convex(hull, p) {
                continue;
            }
            inside += 1;
            if footprints
                .iter()
                .any(|f| point_in_convex(&orient_ccw(f.to_vec()), p))
            {
                covered += 1;
            }
        }
    }
    if inside == 0 {
        0.0
    } else {
        covered as f64 / inside as f64
    }
}

fn bounds(points: &[(f64, f64)], f: impl Fn(&(f64, f64)) -> f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in points {
        lo = lo.min(f(p));
        hi = hi.max(f(p));
    }
    (lo, hi)
}

fn orient_ccw(mut poly: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if signed_area(&poly) < 0.0 {
        poly.reverse();
    }
    poly
}

fn signed_area(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    acc / 2.0
}

fn point_in_convex(poly: &[(f64, f64)], p: (f64, f64)) -> bool {
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        if cross < -1e-12 {
            return false;
        }
    }
    true
}

/// Andrew's monotone chain; collinear points are dropped. Returns the
/// hull in counterclockwise order.
fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let chain = |points: &mut dyn Iterator<Item = (f64, f64)>| {
        let mut half: Vec<(f64, f64)> = Vec::new();
        for p in points {
            while half.len() >= 2 && cross(half[half.len() - 2], half[half.len() - 1], p) <= 1e-15 {
                half.pop();
            }
            half.push(p);
        }
        half.pop();
        half
    };
    let mut hull = chain(&mut pts.iter().copied());
    hull.extend(chain(&mut pts.iter().rev().copied()));
    hull
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nadir_footprint_is_the_fov_rectangle() {
        let cam = CameraModel {
            h_fov_deg: 90.0,
            v_fov_deg: 90.0,
            width_px: 1000,
            height_px: 1000,
            max_tilt_deg: 90.0,
        };
        let wp = Waypoint {
            position: (0.0, 0.0, 1.0),
            camera_tilt_deg: 90.0,
        };
        let quad = footprint(&cam, &wp).unwrap();
        let area = polygon_area(&orient_ccw(quad.to_vec()));
        assert!((area - 4.0).abs() < 1e-9, "2 m x 2 m square, got area {area}");
        for (x, y) in quad {
            assert!(x.abs() <= 1.0 + 1e-9 && y.abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn footprint_scales_with_altitude() {
        let cam = CameraModel {
            max_tilt_deg: 90.0,
            ..CameraModel::default()
        };
        let at = |z: f64| {
            footprint(
                &cam,
                &Waypoint {
                    position: (0.0, 0.0, z),
                    camera_tilt_deg: 90.0,
                },
            )
            .unwrap()
        };
        let a1 = polygon_area(&orient_ccw(at(1.0).to_vec()));
        let a2 = polygon_area(&orient_ccw(at(2.0).to_vec()));
        assert!((a2 / a1 - 4.0).abs() < 1e-9, "sides double, area quadruples");
    }

    #[test]
    fn shallow_tilt_ray_misses_plane() {
        let cam = CameraModel::default();
        let wp = Waypoint {
            position: (0.0, 0.0, 0.5),
            camera_tilt_deg: 10.0, // upper rays point above the horizon
        };
        assert!(matches!(footprint(&cam, &wp), Err(PlanError::Domain(_))));
    }

    #[test]
    fn overlap_identity_disjoint_and_half() {
        let unit: Quad = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let shifted: Quad = [(0.5, 0.0), (1.5, 0.0), (1.5, 1.0), (0.5, 1.0)];
        let far: Quad = [(5.0, 5.0), (6.0, 5.0), (6.0, 6.0), (5.0, 6.0)];
        assert!((overlap_fraction(&unit, &unit) - 1.0).abs() < 1e-12);
        assert_eq!(overlap_fraction(&unit, &far), 0.0);
        assert!((overlap_fraction(&unit, &shifted) - 0.5).abs() < 1e-12);
        assert!((overlap_fraction(&shifted, &unit) - 0.5).abs() < 1e-12, "symmetric");
    }

    #[test]
    fn gsd_reference_values() {
        let cam = CameraModel {
            h_fov_deg: 90.0,
            v_fov_deg: 60.0,
            width_px: 1000,
            height_px: 600,
            max_tilt_deg: 90.0,
        };
        assert!((ground_sample_distance(&cam, 1.0) - 2.0).abs() < 1e-12);

        let bebop = CameraModel::default();
        // 2 * 0.5 * tan(28°) / 856 * 1000
        let expect = 2.0 * 0.5 * (28f64.to_radians()).tan() / 856.0 * 1000.0;
        assert!((ground_sample_distance(&bebop, 0.5) - expect).abs() < 1e-12);
        assert!((expect - 0.621).abs() < 1e-3);
        // Linear in distance.
        let half = ground_sample_distance(&bebop, 0.25);
        assert!((half * 2.0 - expect).abs() < 1e-12);
    }

    #[test]
    fn default_plan_over_2m_square() {
        let pile = vec![(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
        let plan = plan_flight(&pile, 0.5, 83.0, &CameraModel::default(), &PlanOptions::default())
            .unwrap();
        assert_eq!(plan.waypoints.len(), 9);
        for wp in &plan.waypoints {
            assert_eq!(wp.camera_tilt_deg, 83.0);
            assert_eq!(wp.position.2, 0.5);
        }
        let fps: Vec<Quad> = plan
            .waypoints
            .iter()
            .map(|wp| footprint(&CameraModel::default(), wp).unwrap())
            .collect();
        assert!(max_pairwise_overlap(&fps) <= 0.10);
    }

    #[test]
    fn tilt_over_limit_is_rejected() {
        let pile = vec![(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
        assert!(matches!(
            plan_flight(&pile, 0.5, 90.0, &CameraModel::default(), &PlanOptions::default()),
            Err(PlanError::TiltExceedsLimit { .. })
        ));
    }

    #[test]
    fn degenerate_polygon_is_rejected() {
        assert!(matches!(
            plan_flight(&[(0.0, 0.0)], 0.5, 83.0, &CameraModel::default(), &PlanOptions::default()),
            Err(PlanError::PolygonDegenerate(_))
        ));
        let collinear = vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)];
        assert!(matches!(
            plan_flight(&collinear, 0.5, 83.0, &CameraModel::default(), &PlanOptions::default()),
            Err(PlanError::PolygonDegenerate(_))
        ));
    }

    #[test]
    fn oversize_pile_is_infeasible() {
        let pile = vec![(-10.0, -10.0), (10.0, -10.0), (10.0, 10.0), (-10.0, 10.0)];
        assert!(matches!(
            plan_flight(&pile, 0.5, 83.0, &CameraModel::default(), &PlanOptions::default()),
            Err(PlanError::CoverageInfeasible(_))
        ));
    }
}
