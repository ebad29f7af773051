//! Segmentation quality against a ground-truth label map: fusion and
//! disintegration counts (the classic delineation failure modes) plus a
//! tolerance-dilated boundary IoU.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{DelineationError, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    /// Predicted regions that majority-cover two or more truth regions.
    pub fusion_count: u32,
    /// Truth regions split across two or more predicted regions.
    pub disintegration_count: u32,
    /// IoU of boundary masks after dilation by `boundary_tolerance_px`.
    pub boundary_iou: f64,
    pub boundary_tolerance_px: u32,
}

/// Compares a predicted label map against ground truth.
///
/// A predicted region covers a truth region when it holds the majority of
/// that region's pixels; a truth region is split when two or more predicted
/// regions have their own majority inside it.
pub fn match_to_truth(net: &LabelMap, truth: &LabelMap) -> Result<QualityReport, DelineationError> {
    match_to_truth_tol(net, truth, 1)
}

pub fn match_to_truth_tol(
    net: &LabelMap,
    truth: &LabelMap,
    tolerance_px: u32,
) -> Result<QualityReport, DelineationError> {
    if net.width != truth.width || net.height != truth.height {
        return Err(DelineationError::DimensionMismatch(
            net.width,
            net.height,
            truth.width,
            truth.height,
        ));
    }

    let mut overlap: HashMap<(u32, u32), u64> = HashMap::new();
    let mut pred_area: HashMap<u32, u64> = HashMap::new();
    let mut truth_area: HashMap<u32, u64> = HashMap::new();
    for (p, t) in net.labels.iter().zip(&truth.labels) {
        if *p != 0 {
            *pred_area.entry(*p).or_default() += 1;
        }
        if *t != 0 {
            *truth_area.entry(*t).or_default() += 1;
        }
        if *p != 0 && *t != 0 {
            *overlap.entry((*p, *t)).or_default() += 1;
        }
    }

    let mut covered_by_pred: HashMap<u32, u32> = HashMap::new();
    let mut splits_of_truth: HashMap<u32, u32> = HashMap::new();
    for (&(p, t), &n) in &overlap {
        if n * 2 > truth_area[&t] {
            *covered_by_pred.entry(p).or_default() += 1;
        }
        if n * 2 > pred_area[&p] {
            *splits_of_truth.entry(t).or_default() += 1;
        }
    }
    let fusion_count = covered_by_pred.values().filter(|&&k| k >= 2).count() as u32;
    let disintegration_count = splits_of_truth.values().filter(|&&k| k >= 2).count() as u32;

    let bn = dilate(&boundary_mask(net), net.width as usize, net.height as usize, tolerance_px);
    let bt = dilate(
        &boundary_mask(truth),
        truth.width as usize,
        truth.height as usize,
        tolerance_px,
    );
    let mut inter = 0u64;
    let mut union = 0u64;
    for (a, b) in bn.iter().zip(&bt) {
        if *a && *b {
            inter += 1;
        }
        if *a || *b {
            union += 1;
        }
    }
    let boundary_iou = if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    };

    Ok(QualityReport {
        fusion_count,
        disintegration_count,
        boundary_iou,
        boundary_tolerance_px: tolerance_px,
    })
}

/// Pixels whose 4-neighborhood contains a different label.
fn boundary_mask(map: &LabelMap) -> Vec<bool> {
    let (w, h) = (map.width as usize, map.height as usize);
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let l = map.labels[y * w + x];
            let mut edge = false;
            if x + 1 < w && map.labels[y * w + x + 1] != l {
                edge = true;
            }
            if y + 1 < h && map.labels[(y + 1) * w + x] != l {
                edge = true;
            }
            if x > 0 && map.labels[y * w + x - 1] != l {
                edge = true;
            }
            if y > 0 && map.labels[(y - 1) * w + x] != l {
                edge = true;
            }
            if edge {
                out[y * w + x] = true;
            }
        }
    }
    out
}

fn dilate(mask: &[bool], w: usize, h: usize, radius: u32) -> Vec<bool> {
    if radius == 0 {
        return mask.to_vec();
    }
    let r = radius as isize;
    let mut out = vec![false; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            if !mask[y as usize * w + x as usize] {
                continue;
            }
            for dy in -r..=r {
                for dx in -r..=r {
                    let nx = x + dx;
                    let ny = y + dy;
                    if nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize {
                        out[ny as usize * w + nx as usize] = true;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_from(w: u32, h: u32, f: impl Fn(u32, u32) -> u32) -> LabelMap {
        let mut m = LabelMap::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                m.set(x, y, f(x, y));
            }
        }
        m
    }

    #[test]
    fn identical_maps_are_perfect() {
        let m = map_from(20, 20, |x, _| if x < 10 { 1 } else { 2 });
        let q = match_to_truth(&m, &m).unwrap();
        assert_eq!(q.fusion_count, 0);
        assert_eq!(q.disintegration_count, 0);
        assert_eq!(q.boundary_iou, 1.0);
    }

    #[test]
    fn one_pred_covering_two_truths_is_fusion() {
        let truth = map_from(20, 10, |x, _| if x < 10 { 1 } else { 2 });
        let net = map_from(20, 10, |_, _| 1);
        let q = match_to_truth(&net, &truth).unwrap();
        assert_eq!(q.fusion_count, 1);
        assert_eq!(q.disintegration_count, 0);
    }

    #[test]
    fn truth_split_in_two_is_disintegration() {
        let truth = map_from(20, 10, |_, _| 1);
        let net = map_from(20, 10, |x, _| if x < 10 { 1 } else { 2 });
        let q = match_to_truth(&net, &truth).unwrap();
        assert_eq!(q.disintegration_count, 1);
        assert_eq!(q.fusion_count, 0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = LabelMap::zeros(4, 4);
        let b = LabelMap::zeros(5, 4);
        assert!(matches!(
            match_to_truth(&a, &b),
            Err(DelineationError::DimensionMismatch(..))
        ));
    }
}
