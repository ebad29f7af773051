//! Binary PGM (P5) codec. 8-bit rasters use maxval 255; label maps use
//! maxval 65535 with big-endian samples, per the netpbm convention.

use super::{IoError, Raster};

/// Reads one whitespace-delimited ASCII token, skipping `#` comments.
/// Returns the token and the offset just past it.
fn next_token(bytes: &[u8], mut pos: usize) -> Result<(usize, usize), IoError> {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        break;
    }
    if pos >= bytes.len() {
        return Err(IoError::MalformedHeader("unexpected end of header".into()));
    }
    let start = pos;
    while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
        pos += 1;
    }
    Ok((start, pos))
}

fn parse_number(bytes: &[u8], pos: usize, what: &str) -> Result<(u32, usize), IoError> {
    let (start, end) = next_token(bytes, pos)?;
    let text = std::str::from_utf8(&bytes[start..end])
        .map_err(|_| IoError::MalformedHeader(format!("non-ASCII {what}")))?;
    let value: u32 = text
        .parse()
        .map_err(|_| IoError::MalformedHeader(format!("invalid {what} {text:?}")))?;
    Ok((value, end))
}

struct PgmHeader {
    width: u32,
    height: u32,
    maxval: u32,
    payload_start: usize,
}

fn decode_header(bytes: &[u8]) -> Result<PgmHeader, IoError> {
    if !bytes.starts_with(b"P5") {
        return Err(IoError::MalformedHeader("missing P5 magic".into()));
    }
    let (width, pos) = parse_number(bytes, 2, "width")?;
    let (height, pos) = parse_number(bytes, pos, "height")?;
    let (maxval, pos) = parse_number(bytes, pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(IoError::MalformedHeader(format!(
            "zero raster dimension {width}x{height}"
        )));
    }
    // Exactly one whitespace byte separates the maxval from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(IoError::MalformedHeader(
            "missing whitespace before payload".into(),
        ));
    }
    Ok(PgmHeader {
        width,
        height,
        maxval,
        payload_start: pos + 1,
    })
}

pub(super) fn decode_pgm8(bytes: &[u8]) -> Result<Raster, IoError> {
    let h = decode_header(bytes)?;
    if h.maxval != 255 {
        return Err(IoError::UnsupportedDepth(format!(
            "maxval {} (expected 255)",
            h.maxval
        )));
    }
    let expected = h.width as usize * h.height as usize;
    let payload = &bytes[h.payload_start.min(bytes.len())..];
    if payload.len() < expected {
        return Err(IoError::TruncatedPayload {
            expected,
            actual: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(IoError::TrailingBytes);
    }
    Raster::new(h.width, h.height, payload.to_vec())
}

pub(super) fn encode_pgm8(r: &Raster) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", r.width(), r.height());
    let mut out = Vec::with_capacity(header.len() + r.samples().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(r.samples());
    out
}

/// Encodes a label map as 16-bit PGM (P5, maxval 65535, big-endian).
/// Labels above 65535 are an error at the call site; maps produced by the
/// delineation pipeline stay far below that.
pub fn encode_label_map_pgm16(width: u32, height: u32, labels: &[u32]) -> Result<Vec<u8>, IoError> {
    let expect = width as usize * height as usize;
    if labels.len() != expect {
        return Err(IoError::TruncatedPayload {
            expected: expect,
            actual: labels.len(),
        });
    }
    let header = format!("P5\n{width} {height}\n65535\n");
    let mut out = Vec::with_capacity(header.len() + labels.len() * 2);
    out.extend_from_slice(header.as_bytes());
    for &l in labels {
        if l > u16::MAX as u32 {
            return Err(IoError::UnsupportedDepth(format!(
                "label {l} exceeds 16-bit range"
            )));
        }
        out.extend_from_slice(&(l as u16).to_be_bytes());
    }
    Ok(out)
}

/// Decodes a 16-bit PGM label map (maxval 65535, big-endian).
pub fn decode_label_map_pgm16(bytes: &[u8]) -> Result<(u32, u32, Vec<u32>), IoError> {
    let h = decode_header(bytes)?;
    if h.maxval != 65535 {
        return Err(IoError::UnsupportedDepth(format!(
            "maxval {} (expected 65535)",
            h.maxval
        )));
    }
    let expected = h.width as usize * h.height as usize;
    let payload = &bytes[h.payload_start.min(bytes.len())..];
    if payload.len() < expected * 2 {
        return Err(IoError::TruncatedPayload {
            expected: expected * 2,
            actual: payload.len(),
        });
    }
    if payload.len() > expected * 2 {
        return Err(IoError::TrailingBytes);
    }
    let labels = payload
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
        .collect();
    Ok((h.width, h.height, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_comments_are_skipped() {
        let bytes = b"P5\n# traced by hand\n2 1\n# another\n255\n\x07\x09";
        let r = decode_pgm8(bytes).unwrap();
        assert_eq!(r.samples(), &[7, 9]);
    }

    #[test]
    fn label_map_roundtrip() {
        let labels = vec![0u32, 1, 2, 65535, 7, 0];
        let bytes = encode_label_map_pgm16(3, 2, &labels).unwrap();
        let (w, h, back) = decode_label_map_pgm16(&bytes).unwrap();
        assert_eq!((w, h), (3, 2));
        assert_eq!(back, labels);
    }

    #[test]
    fn oversized_label_rejected() {
        assert!(encode_label_map_pgm16(1, 1, &[70_000]).is_err());
    }
}
