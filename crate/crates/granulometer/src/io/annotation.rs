//! Scale-object annotation files: one traced circle per line,
//! `cx_px,cy_px,radius_px,diameter_mm`. Blank lines and `#` comments are
//! allowed so the files stay hand-editable.

use super::IoError;

/// A manually traced scale object: image-space circle plus true diameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracedCircle {
    pub center: (f64, f64),
    pub radius_px: f64,
    pub diameter_mm: f64,
}

pub fn read_scale_annotation(text: &str) -> Result<Vec<TracedCircle>, IoError> {
    let mut circles = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(IoError::ParseError {
                line: idx + 1,
                message: format!("expected 4 comma-separated fields, got {}", fields.len()),
            });
        }
        let mut values = [0.0f64; 4];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| IoError::ParseError {
                line: idx + 1,
                message: format!("invalid number {field:?}"),
            })?;
        }
        let [cx, cy, radius_px, diameter_mm] = values;
        if !radius_px.is_finite() || radius_px <= 0.0 {
            return Err(IoError::ParseError {
                line: idx + 1,
                message: format!("radius must be positive, got {radius_px}"),
            });
        }
        if !diameter_mm.is_finite() || diameter_mm <= 0.0 {
            return Err(IoError::ParseError {
                line: idx + 1,
                message: format!("diameter must be positive, got {diameter_mm}"),
            });
        }
        circles.push(TracedCircle {
            center: (cx, cy),
            radius_px,
            diameter_mm,
        });
    }
    if circles.is_empty() {
        return Err(IoError::EmptyAnnotation);
    }
    Ok(circles)
}

/// Serializes circles in the same line format `read_scale_annotation` accepts.
pub fn write_scale_annotation(circles: &[TracedCircle]) -> String {
    let mut out = String::new();
    for c in circles {
        out.push_str(&format!(
            "{:.3},{:.3},{:.3},{:.3}\n",
            c.center.0, c.center.1, c.radius_px, c.diameter_mm
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_record() {
        let circles = read_scale_annotation("100,100,60,60\n").unwrap();
        assert_eq!(circles.len(), 1);
        assert_eq!(circles[0].center, (100.0, 100.0));
        assert_eq!(circles[0].diameter_mm, 60.0);
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(
            read_scale_annotation(""),
            Err(IoError::EmptyAnnotation)
        ));
        assert!(matches!(
            read_scale_annotation("# only a comment\n\n"),
            Err(IoError::EmptyAnnotation)
        ));
    }

    #[test]
    fn zero_radius_is_a_parse_error() {
        match read_scale_annotation("10,10,0,60\n") {
            Err(IoError::ParseError { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected ParseError, got {other:?}"),
        }
    }

    #[test]
    fn reports_offending_line_number() {
        let text = "10,10,5,60\nbogus line\n";
        match read_scale_annotation(text) {
            Err(IoError::ParseError { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected ParseError, got {other:?}"),
        }
    }

    #[test]
    fn write_read_roundtrip() {
        let circles = vec![TracedCircle {
            center: (421.5, 77.25),
            radius_px: 119.75,
            diameter_mm: 60.0,
        }];
        let text = write_scale_annotation(&circles);
        let back = read_scale_annotation(&text).unwrap();
        assert!((back[0].radius_px - 119.75).abs() < 1e-9);
    }
}
