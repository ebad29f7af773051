//! Contrast preprocessing ahead of segmentation.

use serde::{Deserialize, Serialize};

use crate::io::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastMode {
    /// Pass the raster through unchanged.
    None,
    /// Affine map of [min, max] onto [0, 255].
    LinearStretch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContrastOptions {
    pub mode: ContrastMode,
    /// Inputs whose robust dynamic range (1st..99th percentile span) is
    /// below this floor are passed through unchanged: stretching them
    /// would only amplify sensor noise, and the downstream low-contrast
    /// check must still see the dark frame as dark.
    pub stretch_floor: u8,
    /// Stretching a frame that uses only a handful of gray levels turns
    /// quantization steps into hard terraces; below this distinct-level
    /// count, a small binomial blur runs before the stretch to recover
    /// sub-level precision. 0 (the default) keeps the stretch purely
    /// affine.
    pub anti_terrace_levels: u8,
}

impl Default for ContrastOptions {
    fn default() -> Self {
        Self {
            mode: ContrastMode::LinearStretch,
            stretch_floor: 8,
            anti_terrace_levels: 0,
        }
    }
}

/// Normalizes contrast. Output has the input's dimensions, samples stay in
/// [0, 255], and constant inputs map to constant outputs.
pub fn preprocess(r: &Raster, opts: &ContrastOptions) -> Raster {
    match opts.mode {
        ContrastMode::None => r.clone(),
        ContrastMode::LinearStretch => {
            let robust = robust_range(r);
            if robust < opts.stretch_floor as u32 {
                return r.clone();
            }
            let distinct = distinct_levels(r);
            if distinct > opts.anti_terrace_levels as usize || distinct < 2 {
                let (lo, hi) = r.min_max();
                let scale = 255.0 / (hi - lo) as f64;
                let samples = r
                    .samples()
                    .iter()
                    .map(|&v| ((v - lo) as f64 * scale).round() as u8)
                    .collect();
                return Raster::new(r.width(), r.height(), samples).expect("dimensions preserved");
            }
            // Low bit depth: binomial blur in float, then stretch. Two
            // passes under 16 levels, one otherwise.
            let passes = if distinct < 16 { 2 } else { 1 };
            let (w, h) = (r.width() as usize, r.height() as usize);
            let mut vals: Vec<f64> = r.samples().iter().map(|&v| v as f64).collect();
            for _ in 0..passes {
                vals = binomial3x3(&vals, w, h);
            }
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
            let samples = vals
                .iter()
                .map(|&v| ((v - lo) * scale).round().clamp(0.0, 255.0) as u8)
                .collect();
            Raster::new(r.width(), r.height(), samples).expect("dimensions preserved")
        }
    }
}

fn distinct_levels(r: &Raster) -> usize {
    let mut seen = [false; 256];
    for &s in r.samples() {
        seen[s as usize] = true;
    }
    seen.iter().filter(|&&s| s).count()
}

/// One pass of the separable [1 2 1]/4 kernel with border replication.
fn binomial3x3(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut tmp = vec![0f64; w * h];
    let mut out = vec![0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            tmp[y * w + x] =
                (src[y * w + xm] + 2.0 * src[y * w + x] + src[y * w + xp]) / 4.0;
        }
    }
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        for x in 0..w {
            out[y * w + x] = (tmp[ym * w + x] + 2.0 * tmp[y * w + x] + tmp[yp * w + x]) / 4.0;
        }
    }
    out
}

/// 1st..99th percentile span in gray levels.
pub(crate) fn robust_range(r: &Raster) -> u32 {
    let lo = r.percentile(0.01) as u32;
    let hi = r.percentile(0.99) as u32;
    hi.saturating_sub(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_raster_stays_constant() {
        let r = Raster::filled(4, 4, 7);
        let out = preprocess(&r, &ContrastOptions::default());
        let first = out.samples()[0];
        assert!(out.samples().iter().all(|&v| v == first));
    }

    #[test]
    fn stretch_maps_min_max_to_full_range() {
        let mut samples = vec![50u8; 64];
        samples[0] = 50;
        samples[63] = 100;
        for (i, s) in samples.iter_mut().enumerate() {
            *s = 50 + (i as u8 % 51);
        }
        let r = Raster::new(8, 8, samples).unwrap();
        let out = preprocess(&r, &ContrastOptions::default());
        let (lo, hi) = out.min_max();
        assert_eq!((lo, hi), (0, 255));
    }

    #[test]
    fn four_pixel_stretch_hand_case() {
        // (v - 10) * 255 / 30 applied by hand.
        let r = Raster::new(4, 1, vec![10, 20, 30, 40]).unwrap();
        let out = preprocess(&r, &ContrastOptions::default());
        assert_eq!(out.samples(), &[0, 85, 170, 255]);
    }

    #[test]
    fn sub_floor_range_is_passed_through() {
        // Range 5 < default floor 8: stretching would just amplify noise.
        let r = Raster::new(4, 1, vec![1, 3, 4, 6]).unwrap();
        let out = preprocess(&r, &ContrastOptions::default());
        assert_eq!(out.samples(), r.samples());
    }

    #[test]
    fn dimensions_preserved() {
        let r = Raster::filled(5, 3, 9);
        let out = preprocess(&r, &ContrastOptions::default());
        assert_eq!((out.width(), out.height()), (5, 3));
    }

    #[test]
    fn anti_terrace_smooths_coarse_quantization() {
        // A two-level step image: with anti-terrace enabled the output
        // carries intermediate values instead of a hard staircase.
        let mut r = Raster::filled(32, 32, 2);
        for y in 0..32 {
            for x in 16..32 {
                r.set(x, y, 12);
            }
        }
        let opts = ContrastOptions {
            anti_terrace_levels: 48,
            ..ContrastOptions::default()
        };
        let out = preprocess(&r, &opts);
        let distinct: std::collections::BTreeSet<u8> = out.samples().iter().copied().collect();
        assert!(distinct.len() > 4, "blur creates sub-level values");
        let (lo, hi) = out.min_max();
        assert_eq!((lo, hi), (0, 255), "stretch still reaches full range");
        // Default options keep the pure affine behavior.
        let plain = preprocess(&r, &ContrastOptions::default());
        let plain_distinct: std::collections::BTreeSet<u8> =
            plain.samples().iter().copied().collect();
        assert_eq!(plain_distinct.len(), 2);
    }
}
