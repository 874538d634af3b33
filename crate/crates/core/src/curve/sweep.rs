//! Segment-pair queries on closed polylines.
//!
//! Candidate pairs come from a sweep over segments sorted by their left end,
//! keeping an active list of segments whose x-extent is still open; only pairs
//! whose (padded) bounding boxes overlap reach the exact predicates.

use crate::conformal::PlanePoint;

use super::ClosedCurve;

/// A transversal crossing of two non-adjacent segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub seg_a: usize,
    pub seg_b: usize,
    /// Curve parameter of the crossing along each segment.
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub point: PlanePoint,
}

fn orient(a: PlanePoint, b: PlanePoint, c: PlanePoint) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Proper crossing of `ab` and `cd`, returning the fractional positions
/// along each. Endpoints within a relative orientation tolerance of the other
/// segment's line count as touching, not crossing.
pub fn proper_crossing(a: PlanePoint, b: PlanePoint, c: PlanePoint, d: PlanePoint) -> Option<(f64, f64)> {
    let lab = a.dist(&b);
    let lcd = c.dist(&d);
    let scale = lab.max(lcd);
    let (eab, ecd) = (1e-13 * lab * scale, 1e-13 * lcd * scale);
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    if !((o1 > eab && o2 < -eab) || (o1 < -eab && o2 > eab)) {
        return None;
    }
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if !((o3 > ecd && o4 < -ecd) || (o3 < -ecd && o4 > ecd)) {
        return None;
    }
    Some((o3 / (o3 - o4), o1 / (o1 - o2)))
}

fn point_segment(p: PlanePoint, a: PlanePoint, b: PlanePoint) -> (f64, f64) {
    let (ex, ey) = (b.x - a.x, b.y - a.y);
    let len2 = ex * ex + ey * ey;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * ex + (p.y - a.y) * ey) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.dist(&PlanePoint::new(a.x + t * ex, a.y + t * ey)), t)
}

/// Distance between segments `ab` and `cd` with the closest fractional
/// positions. Zero when they cross.
pub fn segment_distance(a: PlanePoint, b: PlanePoint, c: PlanePoint, d: PlanePoint) -> (f64, f64, f64) {
    if let Some((t, u)) = proper_crossing(a, b, c, d) {
        return (0.0, t, u);
    }
    let (d1, u1) = point_segment(a, c, d);
    let (d2, u2) = point_segment(b, c, d);
    let (d3, t3) = point_segment(c, a, b);
    let (d4, t4) = point_segment(d, a, b);
    let mut best = (d1, 0.0, u1);
    for cand in [(d2, 1.0, u2), (d3, t3, 0.0), (d4, t4, 1.0)] {
        if cand.0 < best.0 {
            best = cand;
        }
    }
    best
}

/// Whether segments `i` and `j` of an `n`-gon share a vertex.
#[inline]
pub(crate) fn adjacent(i: usize, j: usize, n: usize) -> bool {
    let d = i.abs_diff(j);
    d <= 1 || d == n - 1
}

/// Non-adjacent segment pairs `(i, j)`, `i < j`, whose bounding boxes overlap
/// after growing each by `pad`.
pub(crate) fn box_pairs(pts: &[PlanePoint], pad: f64) -> Vec<(usize, usize)> {
    let n = pts.len();
    let bbox: Vec<[f64; 4]> = (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            [a.x.min(b.x) - pad, a.x.max(b.x) + pad, a.y.min(b.y) - pad, a.y.max(b.y) + pad]
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| bbox[i][0].total_cmp(&bbox[j][0]).then(i.cmp(&j)));
    let mut active: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for &s in &order {
        let xmin = bbox[s][0];
        active.retain(|&a| bbox[a][1] >= xmin);
        for &a in &active {
            if bbox[a][3] < bbox[s][2] || bbox[s][3] < bbox[a][2] || adjacent(a, s, n) {
                continue;
            }
            out.push((a.min(s), a.max(s)));
        }
        active.push(s);
    }
    out.sort_unstable();
    out
}

/// All transversal crossings between non-adjacent segments of the closed
/// polyline, ordered by segment pair.
pub fn self_intersections(c: &ClosedCurve) -> Vec<Crossing> {
    let pts = c.points();
    let n = pts.len();
    let h = c.step();
    box_pairs(pts, 0.0)
        .into_iter()
        .filter_map(|(i, j)| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            let (p, q) = (pts[j], pts[(j + 1) % n]);
            proper_crossing(a, b, p, q).map(|(t, u)| Crossing {
                seg_a: i,
                seg_b: j,
                alpha_a: (i as f64 + t) * h,
                alpha_b: (j as f64 + u) * h,
                point: PlanePoint::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)),
            })
        })
        .collect()
}

/// Closest approach between non-adjacent segments, if any pair is closer than
/// `within`: `(distance, alpha_a, alpha_b)`.
pub fn closest_approach(c: &ClosedCurve, within: f64) -> Option<(f64, f64, f64)> {
    let pts = c.points();
    let n = pts.len();
    let h = c.step();
    let mut best: Option<(f64, f64, f64)> = None;
    for (i, j) in box_pairs(pts, within) {
        let (dist, t, u) = segment_distance(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]);
        if dist < within && best.map_or(true, |b| dist < b.0) {
            best = Some((dist, (i as f64 + t) * h, (j as f64 + u) * h));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn brute(c: &ClosedCurve) -> Vec<(usize, usize)> {
        let p = c.points();
        let n = p.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if adjacent(i, j, n) {
                    continue;
                }
                if proper_crossing(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n]).is_some() {
                    out.push((i, j));
                }
            }
        }
        out
    }

    #[test]
    fn circle_has_no_crossings() {
        let c = ClosedCurve::from_fn(200, |t| PlanePoint::new(t.cos(), t.sin())).unwrap();
        assert!(self_intersections(&c).is_empty());
    }

    #[test]
    fn limacon_inner_loop_crosses_once_at_pole() {
        let c = ClosedCurve::from_fn(256, |t| {
            let r = 1.0 + 2.0 * t.cos();
            PlanePoint::new(r * t.cos(), r * t.sin())
        })
        .unwrap();
        let x = self_intersections(&c);
        assert_eq!(x.len(), 1);
        assert!(x[0].point.norm() < 1e-3);
        // the pole is reached at θ = 2π/3 and 4π/3
        assert!((x[0].alpha_a - 2.0 * PI / 3.0).abs() < 0.05);
        assert!((x[0].alpha_b - 4.0 * PI / 3.0).abs() < 0.05);
        let pairs: Vec<_> = x.iter().map(|c| (c.seg_a, c.seg_b)).collect();
        assert_eq!(pairs, brute(&c));
    }

    #[test]
    fn bowtie_crosses_at_center() {
        let corners = [(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)];
        let mut pts = Vec::new();
        for k in 0..4 {
            let (a, b) = (corners[k], corners[(k + 1) % 4]);
            for m in 0..5 {
                let t = m as f64 / 5.0;
                pts.push(PlanePoint::new(a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
            }
        }
        let c = ClosedCurve::new(pts, 2.0 * PI).unwrap();
        let x = self_intersections(&c);
        assert_eq!(x.len(), 1);
        assert!(x[0].point.dist(&PlanePoint::new(0.5, 0.5)) < 1e-14);
    }

    #[test]
    fn distance_of_parallel_segments() {
        let (d, _, _) = segment_distance(
            PlanePoint::new(0.0, 0.0),
            PlanePoint::new(1.0, 0.0),
            PlanePoint::new(0.5, 0.25),
            PlanePoint::new(2.0, 0.25),
        );
        assert!((d - 0.25).abs() < 1e-15);
    }
}
