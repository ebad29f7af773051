//! Granulometry toolkit for rock-fragment size measurement from images.
//!
//! The pipeline stages are:
//!
//! 1. **io** – raster decode/encode (PGM/PNG), scale-object annotations,
//!    label-map export.
//! 2. **delineation** – contrast preprocessing, marker-based watershed
//!    particle segmentation, spherical scale-object detection, and
//!    segmentation quality metrics (fusion/disintegration/boundary IoU).
//! 3. **granulometry** – cumulative size distributions from delineated
//!    particles, Swebrec curve evaluation and fitting, percent-error
//!    residuals, 2-norm curve error, and the 30% error-envelope check.
//! 4. **synthcam** – synthetic rock-pile generation with known ground-truth
//!    distributions, plus a parametric lighting/sensor model for rendering
//!    piles under controlled illuminance and evenness.
//! 5. **missionplan** – nine-waypoint capture geometry over a pile footprint:
//!    camera footprints, pairwise overlap, ground sample distance.

pub mod delineation;
pub mod granulometry;
pub mod io;
pub mod missionplan;
pub mod synthcam;
