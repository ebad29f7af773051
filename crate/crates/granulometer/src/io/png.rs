//! 8-bit grayscale PNG convenience codec, backed by the `image` crate.

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageFormat};

use super::{IoError, Raster};

pub(super) fn decode_png8(bytes: &[u8]) -> Result<Raster, IoError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| IoError::Png(e.to_string()))?;
    match img {
        image::DynamicImage::ImageLuma8(gray) => {
            let (w, h) = (gray.width(), gray.height());
            Raster::new(w, h, gray.into_raw())
        }
        other => Err(IoError::UnsupportedDepth(format!(
            "PNG color type {:?} (expected 8-bit grayscale)",
            other.color()
        ))),
    }
}

pub(super) fn encode_png8(r: &Raster) -> Vec<u8> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(r.samples(), r.width(), r.height(), ExtendedColorType::L8)
        .expect("in-memory PNG encode of a valid raster");
    out
}
