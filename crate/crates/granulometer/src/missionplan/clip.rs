//! Sutherland–Hodgman clipping of a polygon against a convex CCW clip
//! polygon, plus the shoelace area.

/// Clips `subject` to the inside of the CCW convex `clip` polygon.
pub fn clip_convex(subject: &[(f64, f64)], clip: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if subject.len() < 3 || clip.len() < 3 {
        return Vec::new();
    }
    let mut result = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        let a = clip[i];
        let b = clip[(i + 1) % n];
        result = clip_halfplane(&result, a, b);
        if result.len() < 3 {
            return Vec::new();
        }
    }
    result
}

/// Keeps the part of `poly` on or left of the directed edge a→b.
fn clip_halfplane(poly: &[(f64, f64)], a: (f64, f64), b: (f64, f64)) -> Vec<(f64, f64)> {
    let side = |p: (f64, f64)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let s = poly[i];
        let e = poly[(i + 1) % n];
        let ss = side(s);
        let se = side(e);
        let s_in = ss >= 0.0;
        let e_in = se >= 0.0;
        match (s_in, e_in) {
            (true, true) => out.push(e),
            (true, false) | (false, true) => {
                let denom = ss - se;
                if denom.abs() > 1e-30 {
                    let t = ss / denom;
                    out.push((s.0 + (e.0 - s.0) * t, s.1 + (e.1 - s.1) * t));
                }
                if e_in {
                    out.push(e);
                }
            }
            (false, false) => {}
        }
    }
    out
}

/// Unsigned shoelace area.
pub fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    (acc / 2.0).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_offset_squares() {
        let a = vec![(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)];
        let b = vec![(1.0, 1.0), (3.0, 1.0), (3.0, 3.0), (1.0, 3.0)];
        let inter = clip_convex(&a, &b);
        assert!((polygon_area(&inter) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contained_triangle_is_unchanged() {
        let tri = vec![(0.5, 0.5), (1.5, 0.5), (1.0, 1.5)];
        let sq = vec![(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)];
        let inter = clip_convex(&tri, &sq);
        assert!((polygon_area(&inter) - polygon_area(&tri)).abs() < 1e-12);
    }

    #[test]
    fn disjoint_polygons_clip_to_nothing() {
        let a = vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let b = vec![(5.0, 5.0), (6.0, 5.0), (6.0, 6.0), (5.0, 6.0)];
        assert!(clip_convex(&a, &b).is_empty());
    }
}
