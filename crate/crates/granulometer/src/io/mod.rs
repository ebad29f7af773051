//! Raster decode/encode and the pipeline's text file formats.
//!
//! Binary PGM (P5, maxval 255) is the bit-exact interchange format; PNG
//! (8-bit grayscale) is a convenience format. Label maps export as 16-bit
//! PGM (P5, maxval 65535, big-endian). All text files are UTF-8 with LF
//! line endings.

mod annotation;
mod pgm;
mod png;

pub use annotation::{read_scale_annotation, write_scale_annotation, TracedCircle};
pub use pgm::{decode_label_map_pgm16, encode_label_map_pgm16};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 8-bit single-channel image; the unit of analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Raster {
    width: u32,
    height: u32,
    samples: Vec<u8>,
}

impl Raster {
    /// Builds a raster from row-major luminance samples.
    /// Fails unless `samples.len() == width * height` and both dimensions are positive.
    pub fn new(width: u32, height: u32, samples: Vec<u8>) -> Result<Self, IoError> {
        if width == 0 || height == 0 {
            return Err(IoError::MalformedHeader(format!(
                "zero raster dimension {width}x{height}"
            )));
        }
        let expect = width as usize * height as usize;
        if samples.len() != expect {
            return Err(IoError::TruncatedPayload {
                expected: expect,
                actual: samples.len(),
            });
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self::new(width, height, vec![value; width as usize * height as usize])
            .expect("positive dimensions")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.samples[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        self.samples[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn min_max(&self) -> (u8, u8) {
        let mut lo = u8::MAX;
        let mut hi = u8::MIN;
        for &s in &self.samples {
            lo = lo.min(s);
            hi = hi.max(s);
        }
        (lo, hi)
    }

    /// Copies a `w`×`h` window with top-left corner (x0, y0).
    /// The window must lie fully inside the raster.
    pub fn crop(&self, x0: u32, y0: u32, w: u32, h: u32) -> Raster {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "crop out of bounds");
        let mut samples = Vec::with_capacity(w as usize * h as usize);
        for y in y0..y0 + h {
            let row = y as usize * self.width as usize;
            samples.extend_from_slice(&self.samples[row + x0 as usize..row + (x0 + w) as usize]);
        }
        Raster::new(w, h, samples).expect("window dimensions are positive")
    }

    /// Value at the given cumulative fraction of the sample population
    /// (0.0 = darkest, 1.0 = brightest). Used for robust dynamic-range
    /// estimates that ignore isolated noise pixels.
    pub fn percentile(&self, fraction: f64) -> u8 {
        let mut hist = [0u64; 256];
        for &s in &self.samples {
            hist[s as usize] += 1;
        }
        let total = self.samples.len() as u64;
        let target = (fraction.clamp(0.0, 1.0) * total as f64).ceil().max(1.0) as u64;
        let mut acc = 0u64;
        for (v, &n) in hist.iter().enumerate() {
            acc += n;
            if acc >= target {
                return v as u8;
            }
        }
        255
    }
}

/// Raster interchange formats supported by [`encode_raster`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterFormat {
    Pgm,
    Png,
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} samples, got {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("unsupported sample depth: {0}")]
    UnsupportedDepth(String),
    #[error("trailing bytes after declared payload")]
    TrailingBytes,
    #[error("annotation parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("annotation file contains no records")]
    EmptyAnnotation,
    #[error("png: {0}")]
    Png(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const PNG_MAGIC: &[u8] = &[0x89, b'P', b'N', b'G'];

/// Decodes a binary PGM (P5, maxval 255) or an 8-bit grayscale PNG.
/// Every sample value and the declared dimensions are preserved.
pub fn decode_raster(bytes: &[u8]) -> Result<Raster, IoError> {
    if bytes.starts_with(b"P5") {
        pgm::decode_pgm8(bytes)
    } else if bytes.starts_with(PNG_MAGIC) {
        png::decode_png8(bytes)
    } else {
        Err(IoError::MalformedHeader(
            "unrecognized magic (expected P5 PGM or PNG)".into(),
        ))
    }
}

/// Encodes a raster canonically; decoding the output reproduces the input
/// exactly, and two encodes of the same raster are byte-identical.
pub fn encode_raster(r: &Raster, format: RasterFormat) -> Vec<u8> {
    match format {
        RasterFormat::Pgm => pgm::encode_pgm8(r),
        RasterFormat::Png => png::encode_png8(r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_small_p5_payload() {
        let bytes = b"P5\n2 2\n255\n\x00\xff\x80\x40";
        let r = decode_raster(bytes).unwrap();
        assert_eq!((r.width(), r.height()), (2, 2));
        assert_eq!(r.samples(), &[0, 255, 128, 64]);
    }

    #[test]
    fn canonical_roundtrip_is_identity_bytes() {
        let bytes: Vec<u8> = b"P5\n2 2\n255\n\x00\xff\x80\x40".to_vec();
        let r = decode_raster(&bytes).unwrap();
        assert_eq!(encode_raster(&r, RasterFormat::Pgm), bytes);
    }

    #[test]
    fn smallest_frame_encoding() {
        let r = Raster::new(1, 1, vec![0]).unwrap();
        let mut expect = b"P5\n1 1\n255\n".to_vec();
        expect.push(0x00);
        assert_eq!(encode_raster(&r, RasterFormat::Pgm), expect);
    }

    #[test]
    fn analysis_frame_dimensions() {
        // 856x480 is the canonical analysis frame size.
        let r = Raster::filled(856, 480, 0);
        let bytes = encode_raster(&r, RasterFormat::Pgm);
        let back = decode_raster(&bytes).unwrap();
        assert_eq!((back.width(), back.height()), (856, 480));
        assert!(back.samples().iter().all(|&s| s == 0));
    }

    #[test]
    fn truncated_payload_rejected() {
        let bytes = b"P5\n2 2\n255\n\x00\xff\x80";
        match decode_raster(bytes) {
            Err(IoError::TruncatedPayload { expected, actual }) => {
                assert_eq!((expected, actual), (4, 3));
            }
            other => panic!("expected TruncatedPayload, got {other:?}"),
        }
    }

    #[test]
    fn trailing_bytes_rejected() {
        let bytes = b"P5\n1 1\n255\n\x00\x01";
        assert!(matches!(decode_raster(bytes), Err(IoError::TrailingBytes)));
    }

    #[test]
    fn non_255_maxval_rejected() {
        let bytes = b"P5\n1 1\n127\n\x00";
        assert!(matches!(
            decode_raster(bytes),
            Err(IoError::UnsupportedDepth(_))
        ));
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(matches!(
            decode_raster(b"P6\n1 1\n255\n\x00"),
            Err(IoError::MalformedHeader(_))
        ));
    }

    #[test]
    fn png_roundtrip_preserves_samples() {
        let samples: Vec<u8> = (0..64u32).map(|i| (i * 37 % 256) as u8).collect();
        let r = Raster::new(8, 8, samples).unwrap();
        let bytes = encode_raster(&r, RasterFormat::Png);
        let back = decode_raster(&bytes).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn png_encode_is_deterministic() {
        let r = Raster::filled(16, 16, 99);
        assert_eq!(
            encode_raster(&r, RasterFormat::Png),
            encode_raster(&r, RasterFormat::Png)
        );
    }

    #[test]
    fn percentile_of_uniform_histogram() {
        let r = Raster::new(16, 16, (0..=255u8).collect()).unwrap();
        assert_eq!(r.percentile(0.0), 0);
        assert!(r.percentile(0.5) >= 126 && r.percentile(0.5) <= 128);
        assert_eq!(r.percentile(1.0), 255);
    }
}
