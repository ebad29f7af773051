//! Marker-based watershed segmentation on the gradient magnitude.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::io::Raster;

use super::preprocess::robust_range;
use super::{DelineationError, DelineationNet, LabelMap, Particle, SegmentationParams};

/// Segments a preprocessed raster into particle regions.
///
/// Deterministic for identical inputs. Regions below
/// `params.min_particle_area` merge into label 0 (unresolved/fines).
/// Raises `LowContrast` when the raster's robust dynamic range is below
/// `params.low_contrast_floor` — the dark-image hard failure.
pub fn segment(r: &Raster, params: &SegmentationParams) -> Result<DelineationNet, DelineationError> {
    segment_masked(r, params, None)
}

/// Like [`segment`], with pixels marked `true` in `exclude` removed from
/// the analysis entirely (neither particle nor fines). Used to mask out
/// traced or detected scale objects.
pub fn segment_masked(
    r: &Raster,
    params: &SegmentationParams,
    exclude: Option<&[bool]>,
) -> Result<DelineationNet, DelineationError> {
    let range = robust_range(r);
    if range < params.low_contrast_floor as u32 {
        return Err(DelineationError::LowContrast {
            range: range as u8,
            floor: params.low_contrast_floor,
        });
    }
    let (w, h) = (r.width() as usize, r.height() as usize);
    let n = w * h;
    if let Some(mask) = exclude {
        assert_eq!(mask.len(), n, "exclusion mask must match raster size");
    }
    let excluded = |idx: usize| exclude.map_or(false, |m| m[idx]);

    // Gradient magnitude, smoothed. Dim frames arrive stretched from only
    // a handful of sensor levels, and the resulting terraces read as fake
    // gradient ridges; widen the smoothing as the level count drops.
    // Quantized to integers so the flood order is exact.
    let radius = params.gradient_smoothing_radius + quantization_extra_radius(r);
    let grad = smoothed_gradient(r, radius);
    let grad_q: Vec<u32> = grad.iter().map(|&g| (g * 64.0).round() as u32).collect();

    // Foreground = estimated pile material (analysis region).
    let fg_threshold = params
        .foreground_threshold
        .unwrap_or_else(|| background_threshold(r));
    let foreground: Vec<bool> = r
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &v)| v >= fg_threshold && !excluded(i))
        .collect();

    // Markers: connected plateaus of low smoothed gradient (the local
    // maxima of the inverted gradient). The cutoff is the configured
    // quantile of the gradient over foreground pixels, so plateaus exist at
    // every exposure level. Only plateaus sitting mostly on foreground seed
    // particles; background stays unflooded.
    let marker_cut = marker_cutoff(&grad, &foreground, params.marker_threshold);
    let marker_mask: Vec<bool> = grad
        .iter()
        .enumerate()
        .map(|(i, &g)| g <= marker_cut && !excluded(i))
        .collect();
    let (seeds, n_seeds) = label_components_8(&marker_mask, w, h);

    let mut comp_area = vec![0u32; n_seeds + 1];
    let mut comp_fg = vec![0u32; n_seeds + 1];
    for i in 0..n {
        let c = seeds[i] as usize;
        if c > 0 {
            comp_area[c] += 1;
            if foreground[i] {
                comp_fg[c] += 1;
            }
        }
    }
    let mut seed_label = vec![0u32; n_seeds + 1];
    let mut next = 1u32;
    for c in 1..=n_seeds {
        if comp_area[c] >= params.min_marker_area && comp_fg[c] * 2 > comp_area[c] {
            seed_label[c] = next;
            next += 1;
        }
    }

    // Priority flood over the quantized gradient, constrained to the
    // foreground: rims can only be claimed by their particle's seed, and
    // the line between touching particles settles on the gradient ridge.
    let mut labels = vec![UNLABELED; n];
    let mut heap: BinaryHeap<Reverse<(u32, u64, u32)>> = BinaryHeap::new();
    let mut seq = 0u64;
    for i in 0..n {
        let c = seeds[i] as usize;
        if c > 0 && seed_label[c] != 0 && foreground[i] {
            labels[i] = seed_label[c];
        }
    }
    let floodable = |idx: usize| foreground[idx];
    for i in 0..n {
        if labels[i] == UNLABELED {
            continue;
        }
        for nb in neighbors4(i, w, h) {
            if labels[nb] == UNLABELED && floodable(nb) {
                heap.push(Reverse((grad_q[nb], seq, nb as u32)));
                seq += 1;
            }
        }
    }
    while let Some(Reverse((_, _, idx))) = heap.pop() {
        let idx = idx as usize;
        if labels[idx] != UNLABELED {
            continue;
        }
        // Adopt the first labeled 4-neighbor in fixed scan order.
        let mut adopted = UNLABELED;
        for nb in neighbors4(idx, w, h) {
            if labels[nb] != UNLABELED {
                adopted = labels[nb];
                break;
            }
        }
        if adopted == UNLABELED {
            continue;
        }
        labels[idx] = adopted;
        for nb in neighbors4(idx, w, h) {
            if labels[nb] == UNLABELED && floodable(nb) {
                heap.push(Reverse((grad_q[nb], seq, nb as u32)));
                seq += 1;
            }
        }
    }

    // Foreground blobs no seed could reach (small particles whose interior
    // plateau fell above the marker cut) become regions of their own; they
    // are bounded by claimed regions and background, so each component is
    // one unresolved particle candidate.
    for i in 0..n {
        if labels[i] == UNLABELED && !foreground[i] {
            labels[i] = 0;
        }
    }
    let leftover_mask: Vec<bool> = labels.iter().map(|&l| l == UNLABELED).collect();
    let (leftover, n_leftover) = label_components_8(&leftover_mask, w, h);
    for i in 0..n {
        if labels[i] == UNLABELED {
            labels[i] = next + leftover[i] - 1;
        }
    }
    next += n_leftover as u32;

    // Background pixels are label 0; drop sub-threshold regions.
    for i in 0..n {
        if !foreground[i] {
            labels[i] = 0;
        }
    }
    let mut area = vec![0u32; next as usize];
    for &l in &labels {
        if l != 0 {
            area[l as usize] += 1;
        }
    }
    let mut remap = vec![0u32; next as usize];
    let mut final_id = 0u32;
    for i in 0..n {
        let l = labels[i] as usize;
        if l == 0 {
            continue;
        }
        if area[l] < params.min_particle_area {
            labels[i] = 0;
        } else {
            if remap[l] == 0 {
                final_id += 1;
                remap[l] = final_id;
            }
            labels[i] = remap[l];
        }
    }

    let particles = region_stats(&labels, w, h, final_id);
    let analysis_area_px = foreground.iter().filter(|&&f| f).count() as u64;
    let labeled_px: u64 = particles.iter().map(|p| p.area_px as u64).sum();
    let unresolved_fraction = if analysis_area_px == 0 {
        0.0
    } else {
        (analysis_area_px - labeled_px) as f64 / analysis_area_px as f64
    };

    Ok(DelineationNet {
        label_map: LabelMap {
            width: r.width(),
            height: r.height(),
            labels,
        },
        particles,
        unresolved_fraction,
        analysis_area_px,
    })
}

const UNLABELED: u32 = u32::MAX;

fn neighbors4(idx: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let x = idx % w;
    let y = idx / w;
    let mut out = [usize::MAX; 4];
    let mut k = 0;
    if y > 0 {
        out[k] = idx - w;
        k += 1;
    }
    if x > 0 {
        out[k] = idx - 1;
        k += 1;
    }
    if x + 1 < w {
        out[k] = idx + 1;
        k += 1;
    }
    if y + 1 < h {
        out[k] = idx + w;
        k += 1;
    }
    out.into_iter().take(k)
}

/// Sobel magnitude followed by two box-blur passes of the given radius.
fn smoothed_gradient(r: &Raster, radius: u32) -> Vec<f32> {
    let (w, h) = (r.width() as usize, r.height() as usize);
    let s = r.samples();
    let at = |x: isize, y: isize| -> f32 {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        s[yc * w + xc] as f32
    };
    let mut grad = vec![0f32; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = -at(x - 1, y - 1) - 2.0 * at(x - 1, y) - at(x - 1, y + 1)
                + at(x + 1, y - 1)
                + 2.0 * at(x + 1, y)
                + at(x + 1, y + 1);
            let gy = -at(x - 1, y - 1) - 2.0 * at(x, y - 1) - at(x + 1, y - 1)
                + at(x - 1, y + 1)
                + 2.0 * at(x, y + 1)
                + at(x + 1, y + 1);
            grad[y as usize * w + x as usize] = (gx * gx + gy * gy).sqrt();
        }
    }
    if radius == 0 {
        return grad;
    }
    let once = box_blur(&grad, w, h, radius as usize);
    box_blur(&once, w, h, radius as usize)
}

/// Separable box blur with border replication. Radius is small (≤3), so
/// direct window sums are fine.
fn box_blur(src: &[f32], w: usize, h: usize, radius: usize) -> Vec<f32> {
    let mut tmp = vec![0f32; w * h];
    let mut out = vec![0f32; w * h];
    let k = (2 * radius + 1) as f32;
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0f32;
            for dx in -(radius as isize)..=radius as isize {
                let xc = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                acc += src[y * w + xc];
            }
            tmp[y * w + x] = acc / k;
        }
    }
    for x in 0..w {
        for y in 0..h {
            let mut acc = 0f32;
            for dy in -(radius as isize)..=radius as isize {
                let yc = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                acc += tmp[yc * w + x];
            }
            out[y * w + x] = acc / k;
        }
    }
    out
}

/// Marker cutoff = the given quantile of the smoothed gradient over
/// foreground pixels.
fn marker_cutoff(grad: &[f32], foreground: &[bool], quantile: f64) -> f32 {
    let mut fg_grads: Vec<f32> = grad
        .iter()
        .zip(foreground)
        .filter_map(|(&g, &f)| f.then_some(g))
        .collect();
    if fg_grads.is_empty() {
        return 0.0;
    }
    fg_grads.sort_by(|a, b| a.partial_cmp(b).expect("finite gradients"));
    fg_grads[((fg_grads.len() - 1) as f64 * quantile.clamp(0.0, 1.0)) as usize]
}

/// Extra gradient smoothing for coarsely quantized frames, judged by how
/// many distinct gray levels the raster actually uses. Frames that went
/// through anti-terrace preprocessing carry many levels and get none.
fn quantization_extra_radius(r: &Raster) -> u32 {
    let mut seen = [false; 256];
    for &s in r.samples() {
        seen[s as usize] = true;
    }
    let distinct = seen.iter().filter(|&&s| s).count();
    if distinct >= 24 {
        0
    } else if distinct >= 12 {
        1
    } else {
        2
    }
}

/// Foreground cut from background statistics: the dark bench dominates the
/// low quantiles, so the threshold sits just above the background cluster
/// (level + noise margin). A mid-histogram split like Otsu's would also cut
/// the dimly-shaded particle rims and systematically undersize everything.
fn background_threshold(r: &Raster) -> u8 {
    let level = r.percentile(0.25) as f64;
    let spread = (level - r.percentile(0.05) as f64).max(1.0);
    (level + 4.0 * spread + 1.0).min(255.0) as u8
}

/// 8-connected component labeling of a boolean mask. Labels are assigned
/// in raster scan order, so the result is deterministic.
fn label_components_8(mask: &[bool], w: usize, h: usize) -> (Vec<u32>, usize) {
    let mut labels = vec![0u32; mask.len()];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let x = idx % w;
            let y = idx / w;
            for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = x as i32 + dx;
                    let ny = y as i32 + dy;
                    if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                        continue;
                    }
                    let nb = ny as usize * w + nx as usize;
                    if mask[nb] && labels[nb] == 0 {
                        labels[nb] = next;
                        stack.push(nb);
                    }
                }
            }
        }
    }
    (labels, next as usize)
}

/// Area, centroid, and moment-equivalent ellipse axes per region.
/// Second central moments carry the standard +1/12 px² finite-pixel
/// correction so single-pixel regions still yield positive axes.
fn region_stats(labels: &[u32], w: usize, _h: usize, n_regions: u32) -> Vec<Particle> {
    let n = n_regions as usize;
    let mut area = vec![0u64; n + 1];
    let mut sx = vec![0f64; n + 1];
    let mut sy = vec![0f64; n + 1];
    let mut sxx = vec![0f64; n + 1];
    let mut syy = vec![0f64; n + 1];
    let mut sxy = vec![0f64; n + 1];
    for (idx, &l) in labels.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let l = l as usize;
        let x = (idx % w) as f64;
        let y = (idx / w) as f64;
        area[l] += 1;
        sx[l] += x;
        sy[l] += y;
        sxx[l] += x * x;
        syy[l] += y * y;
        sxy[l] += x * y;
    }
    let mut out = Vec::with_capacity(n);
    for l in 1..=n {
        let a = area[l] as f64;
        if a == 0.0 {
            continue;
        }
        let cx = sx[l] / a;
        let cy = sy[l] / a;
        let mu20 = sxx[l] / a - cx * cx + 1.0 / 12.0;
        let mu02 = syy[l] / a - cy * cy + 1.0 / 12.0;
        let mu11 = sxy[l] / a - cx * cy;
        let common = ((mu20 - mu02) * (mu20 - mu02) + 4.0 * mu11 * mu11).sqrt();
        let big = (mu20 + mu02 + common) / 2.0;
        let small = ((mu20 + mu02 - common) / 2.0).max(1.0 / 24.0);
        out.push(Particle {
            id: l as u32,
            area_px: area[l] as u32,
            centroid: (cx, cy),
            // Full axis of the moment-equivalent solid ellipse: 4·sqrt(λ).
            ellipse_major: 4.0 * big.sqrt(),
            ellipse_minor: 4.0 * small.sqrt(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent moment computation over a pixel set, for use as the
    /// test oracle against the segmentation's ellipse fits.
    fn mask_ellipse_axes(pixels: &[(u32, u32)]) -> (f64, f64) {
        let a = pixels.len() as f64;
        let cx = pixels.iter().map(|p| p.0 as f64).sum::<f64>() / a;
        let cy = pixels.iter().map(|p| p.1 as f64).sum::<f64>() / a;
        let mut mu20 = 0.0;
        let mut mu02 = 0.0;
        let mut mu11 = 0.0;
        for &(x, y) in pixels {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            mu20 += dx * dx;
            mu02 += dy * dy;
            mu11 += dx * dy;
        }
        mu20 = mu20 / a + 1.0 / 12.0;
        mu02 = mu02 / a + 1.0 / 12.0;
        mu11 /= a;
        let common = ((mu20 - mu02) * (mu20 - mu02) + 4.0 * mu11 * mu11).sqrt();
        let big = (mu20 + mu02 + common) / 2.0;
        let small = ((mu20 + mu02 - common) / 2.0).max(1.0 / 24.0);
        (4.0 * big.sqrt(), 4.0 * small.sqrt())
    }

    fn disc_raster(w: u32, h: u32, discs: &[(f64, f64, f64)], fg: u8, bg: u8) -> Raster {
        let mut r = Raster::filled(w, h, bg);
        for y in 0..h {
            for x in 0..w {
                for &(cx, cy, rad) in discs {
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    if d2 <= rad * rad {
                        r.set(x, y, fg);
                    }
                }
            }
        }
        r
    }

    #[test]
    fn two_separated_discs_give_two_particles() {
        let r = disc_raster(160, 80, &[(40.0, 40.0, 20.0), (120.0, 40.0, 20.0)], 220, 10);
        let net = segment(&r, &SegmentationParams::default()).unwrap();
        assert_eq!(net.particles.len(), 2, "fusion-free separable components");
        for p in &net.particles {
            assert!((p.ellipse_minor - 40.0).abs() < 2.0, "minor {}", p.ellipse_minor);
        }
    }

    #[test]
    fn uniform_black_raster_is_low_contrast() {
        let r = Raster::filled(64, 64, 0);
        match segment(&r, &SegmentationParams::default()) {
            Err(DelineationError::LowContrast { .. }) => {}
            other => panic!("expected LowContrast, got {other:?}"),
        }
    }

    #[test]
    fn segmentation_is_deterministic() {
        let r = disc_raster(120, 90, &[(30.0, 30.0, 14.0), (80.0, 55.0, 18.0)], 200, 5);
        let a = segment(&r, &SegmentationParams::default()).unwrap();
        let b = segment(&r, &SegmentationParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn label_map_ids_match_particle_list() {
        let r = disc_raster(160, 80, &[(40.0, 40.0, 20.0), (120.0, 40.0, 20.0)], 220, 10);
        let net = segment(&r, &SegmentationParams::default()).unwrap();
        let mut seen: Vec<u32> = net.label_map.labels.iter().copied().filter(|&l| l != 0).collect();
        seen.sort_unstable();
        seen.dedup();
        let mut ids: Vec<u32> = net.particles.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        assert_eq!(seen, ids);
        let labeled: u64 = net.particles.iter().map(|p| p.area_px as u64).sum();
        let expect = (net.analysis_area_px as f64 * (1.0 - net.unresolved_fraction)).round() as u64;
        assert_eq!(labeled, expect);
    }

    #[test]
    fn exclusion_mask_removes_region_from_analysis() {
        let r = disc_raster(160, 80, &[(40.0, 40.0, 20.0), (120.0, 40.0, 20.0)], 220, 10);
        let mut mask = vec![false; 160 * 80];
        for y in 0..80u32 {
            for x in 0..160u32 {
                if (x as f64 - 120.0).powi(2) + (y as f64 - 40.0).powi(2) <= 24.0 * 24.0 {
                    mask[y as usize * 160 + x as usize] = true;
                }
            }
        }
        let net = segment_masked(&r, &SegmentationParams::default(), Some(&mask)).unwrap();
        assert_eq!(net.particles.len(), 1, "masked disc must not be a particle");
    }

    #[test]
    fn sub_threshold_regions_merge_into_fines() {
        let mut r = disc_raster(80, 60, &[(25.0, 30.0, 15.0)], 220, 10);
        r.set(70, 10, 220);
        r.set(71, 10, 220);
        let net = segment(&r, &SegmentationParams::default()).unwrap();
        assert_eq!(net.particles.len(), 1);
        assert!(net.unresolved_fraction > 0.0, "2-px blob goes to fines");
    }

    #[test]
    fn moment_axes_of_rasterized_disc_match_diameter() {
        let mut pixels = Vec::new();
        for y in 0..64u32 {
            for x in 0..64u32 {
                if (x as f64 - 32.0).powi(2) + (y as f64 - 32.0).powi(2) <= 20.0 * 20.0 {
                    pixels.push((x, y));
                }
            }
        }
        let (major, minor) = mask_ellipse_axes(&pixels);
        assert!((major - 40.0).abs() < 0.6, "major {major}");
        assert!((minor - 40.0).abs() < 0.6, "minor {minor}");
    }
}
