//! The desingularizing branch map `P(z) = √z`, its inverse `z̃ ↦ z̃²`, and the
//! conformal frame `A = DP ∘ P⁻¹` with weight `Q² = |P' ∘ P⁻¹|²`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Vec2};

/// Frames are refused closer than this to the singular point.
pub const SINGULAR_RADIUS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanePoint {
    pub x: f64,
    pub y: f64,
}

impl PlanePoint {
    pub const ORIGIN: PlanePoint = PlanePoint { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        PlanePoint { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(&self, o: &PlanePoint) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    pub fn to_vec(self) -> Vec2 {
        [self.x, self.y]
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<Vec2> for PlanePoint {
    fn from(v: Vec2) -> Self {
        PlanePoint::new(v[0], v[1])
    }
}

impl From<Complex64> for PlanePoint {
    fn from(c: Complex64) -> Self {
        // -0.0 would flip atan2 on the negative axis
        PlanePoint::new(c.re + 0.0, c.im + 0.0)
    }
}

/// The slit `Γ` along which the square root jumps.
///
/// Stored as a polyline starting at the branch point; the last segment is
/// continued to infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchCut {
    vertices: Vec<PlanePoint>,
    ray_dir: [f64; 2],
}

impl BranchCut {
    /// The principal cut along the negative real axis.
    pub fn principal() -> Self {
        BranchCut {
            vertices: vec![PlanePoint::ORIGIN, PlanePoint::new(-1.0, 0.0)],
            ray_dir: [-1.0, 0.0],
        }
    }

    /// A straight cut leaving the origin at `angle`.
    pub fn ray(angle: f64) -> Self {
        let d = [angle.cos(), angle.sin()];
        BranchCut {
            vertices: vec![PlanePoint::ORIGIN, PlanePoint::new(d[0], d[1])],
            ray_dir: d,
        }
    }

    /// A polyline cut. The origin is prepended when absent.
    pub fn polyline(points: &[PlanePoint]) -> Result<Self> {
        let mut vertices = Vec::with_capacity(points.len() + 1);
        if points.first().map_or(true, |p| p.norm() > 0.0) {
            vertices.push(PlanePoint::ORIGIN);
        }
        for p in points {
            if !p.is_finite() {
                return Err(Error::InvalidInput("non-finite cut vertex".into()));
            }
            if vertices.last().is_some_and(|q: &PlanePoint| q.dist(p) == 0.0) {
                continue;
            }
            vertices.push(*p);
        }
        if vertices.len() < 2 {
            return Err(Error::InvalidInput("branch cut needs a vertex off the origin".into()));
        }
        let n = vertices.len();
        let (a, b) = (vertices[n - 2], vertices[n - 1]);
        let len = a.dist(&b);
        let ray_dir = [(b.x - a.x) / len, (b.y - a.y) / len];
        let cut = BranchCut { vertices, ray_dir };
        cut.check_simple()?;
        Ok(cut)
    }

    pub fn vertices(&self) -> &[PlanePoint] {
        &self.vertices
    }

    pub fn far_direction(&self) -> [f64; 2] {
        self.ray_dir
    }

    fn is_principal(&self) -> bool {
        self.ray_dir == [-1.0, 0.0] && self.vertices.iter().all(|p| p.y == 0.0 && p.x <= 0.0)
    }

    fn check_simple(&self) -> Result<()> {
        let v = &self.vertices;
        let n = v.len();
        for i in 0..n - 1 {
            for j in i + 2..n - 1 {
                if segments_cross(v[i], v[i + 1], v[j], v[j + 1]) {
                    return Err(Error::InvalidInput(format!(
                        "branch cut self-intersects (segments {i} and {j})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Euclidean distance from `z` to the cut, including its infinite tail.
    pub fn distance(&self, z: PlanePoint) -> f64 {
        let v = &self.vertices;
        let mut best = f64::INFINITY;
        for w in v.windows(2) {
            best = best.min(point_segment_distance(z, w[0], w[1]));
        }
        let last = v[v.len() - 1];
        let s = ((z.x - last.x) * self.ray_dir[0] + (z.y - last.y) * self.ray_dir[1]).max(0.0);
        let foot = PlanePoint::new(last.x + s * self.ray_dir[0], last.y + s * self.ray_dir[1]);
        best.min(z.dist(&foot))
    }

    fn scale(&self) -> f64 {
        self.vertices.iter().fold(1.0_f64, |m, p| m.max(p.norm()))
    }

    fn probe_direction(&self) -> [f64; 2] {
        // must point upward so the ray never re-meets the negative axis
        for angle in [1.0_f64, 2.0] {
            let d = [angle.cos(), angle.sin()];
            if (d[0] * self.ray_dir[1] - d[1] * self.ray_dir[0]).abs() > 0.1 {
                return d;
            }
        }
        unreachable!("directions 1 rad apart cannot both be parallel to the cut")
    }

    /// Parity of crossings of the ray `z + t d` with `Γ ∪ ℝ⁻`.
    fn parity(&self, z: PlanePoint, d: [f64; 2], reach: f64) -> bool {
        let mut odd = false;
        // negative real axis, analytically since d_y > 0
        if z.y < 0.0 && z.x - z.y * d[0] / d[1] < 0.0 {
            odd = !odd;
        }
        let v = &self.vertices;
        let last = v[v.len() - 1];
        let tail = PlanePoint::new(last.x + reach * self.ray_dir[0], last.y + reach * self.ray_dir[1]);
        let segs = v.windows(2).map(|w| (w[0], w[1])).chain(std::iter::once((last, tail)));
        for (p, q) in segs {
            if ray_crosses(z, d, p, q) {
                odd = !odd;
            }
        }
        odd
    }

    /// Whether the branch at `z` is the negative of the principal root.
    fn flipped(&self, z: PlanePoint) -> bool {
        if self.is_principal() {
            return false;
        }
        let d = self.probe_direction();
        let r = 10.0 * (self.scale() + 1.0);
        // just clockwise of the direction opposite the tail
        let (c, s) = ((-0.1_f64).cos(), (-0.1_f64).sin());
        let o = [-self.ray_dir[0], -self.ray_dir[1]];
        let zref = PlanePoint::new(r * (c * o[0] - s * o[1]), r * (s * o[0] + c * o[1]));
        let reach = 1e8 * (r + z.norm());
        self.parity(z, d, reach) != self.parity(zref, d, reach)
    }
}

impl Default for BranchCut {
    fn default() -> Self {
        BranchCut::principal()
    }
}

fn orient(a: PlanePoint, b: PlanePoint, c: PlanePoint) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_cross(a: PlanePoint, b: PlanePoint, c: PlanePoint, d: PlanePoint) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

fn point_segment_distance(z: PlanePoint, a: PlanePoint, b: PlanePoint) -> f64 {
    let (ex, ey) = (b.x - a.x, b.y - a.y);
    let len2 = ex * ex + ey * ey;
    let t = if len2 > 0.0 {
        (((z.x - a.x) * ex + (z.y - a.y) * ey) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    z.dist(&PlanePoint::new(a.x + t * ex, a.y + t * ey))
}

/// Half-open crossing test of a ray against a segment: endpoints on the ray's
/// line count as lying on the negative side, so shared vertices count once.
fn ray_crosses(z: PlanePoint, d: [f64; 2], p: PlanePoint, q: PlanePoint) -> bool {
    let side = |w: PlanePoint| d[0] * (w.y - z.y) - d[1] * (w.x - z.x) > 0.0;
    if side(p) == side(q) {
        return false;
    }
    // ray parameter of the crossing with the segment's line
    let (ex, ey) = (q.x - p.x, q.y - p.y);
    let den = d[0] * ey - d[1] * ex;
    let t = ((p.x - z.x) * ey - (p.y - z.y) * ex) / den;
    t > 0.0
}

/// `P(z)`: the branch of `√z` that jumps only across `cut`.
pub fn map_forward(z: PlanePoint, cut: &BranchCut) -> Result<PlanePoint> {
    if !z.is_finite() {
        return Err(Error::InvalidInput("non-finite point".into()));
    }
    let tol = 1e-12 * z.norm().max(1.0);
    if cut.distance(z) <= tol {
        return Err(Error::PointOnCut { x: z.x, y: z.y });
    }
    let z = PlanePoint::from(z.to_complex());
    let root = z.to_complex().sqrt();
    let root = if cut.flipped(z) { -root } else { root };
    Ok(PlanePoint::from(root))
}

/// `P⁻¹(z̃) = z̃²`.
pub fn map_inverse(zt: PlanePoint) -> PlanePoint {
    let c = zt.to_complex();
    PlanePoint::from(c * c)
}

/// The square root of `z` closest to `near`, used to follow a continuous branch
/// along a curve without reference to a cut.
pub fn sqrt_nearest(z: PlanePoint, near: PlanePoint) -> PlanePoint {
    let r = z.to_complex().sqrt();
    let n = near.to_complex();
    if (r - n).norm_sqr() <= (-r - n).norm_sqr() {
        PlanePoint::from(r)
    } else {
        PlanePoint::from(-r)
    }
}

/// Pointwise Jacobian data of `P` in tilde coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalFrame {
    pub point: PlanePoint,
    pub a: Mat2,
    pub q2: f64,
    pub a_inv: Mat2,
}

impl ConformalFrame {
    /// A frame with a prescribed constant matrix (synthetic tests).
    pub fn synthetic(point: PlanePoint, a: Mat2) -> Result<Self> {
        let a_inv = a
            .inverse()
            .ok_or_else(|| Error::InvalidInput("synthetic frame matrix is singular".into()))?;
        let m = &a.0;
        let q2 = 0.5 * (m[0][0] * m[0][0] + m[0][1] * m[0][1] + m[1][0] * m[1][0] + m[1][1] * m[1][1]);
        Ok(ConformalFrame { point, a, q2, a_inv })
    }
}

fn holomorphic(w: Complex64) -> Mat2 {
    Mat2::new(w.re, -w.im, w.im, w.re)
}

/// `A`, `Q²` and `A⁻¹` at `z̃`, in closed form: `A` is multiplication by
/// `P'(z̃²) = 1/(2z̃)`.
pub fn frame_at(zt: PlanePoint) -> Result<ConformalFrame> {
    let r = zt.norm();
    if !(r >= SINGULAR_RADIUS) {
        return Err(Error::SingularPoint { radius: r });
    }
    let c = zt.to_complex();
    let w = (2.0 * c).inv();
    let q2 = 1.0 / (4.0 * r * r);
    Ok(ConformalFrame {
        point: zt,
        a: holomorphic(w),
        q2,
        a_inv: holomorphic(2.0 * c),
    })
}

/// `A` together with its tilde-coordinate derivatives `∂_x A`, `∂_y A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameJet {
    pub frame: ConformalFrame,
    pub dx: Mat2,
    pub dy: Mat2,
}

pub fn frame_jet(zt: PlanePoint) -> Result<FrameJet> {
    let frame = frame_at(zt)?;
    let c = zt.to_complex();
    // d/dz̃ (1/(2z̃)) = -1/(2z̃²); ∂_y = i ∂_x for holomorphic symbols
    let dw = -(2.0 * c * c).inv();
    Ok(FrameJet {
        frame,
        dx: holomorphic(dw),
        dy: holomorphic(Complex64::i() * dw),
    })
}

/// How a domain attaches frames to its nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameModel {
    /// The true frame of `P`, evaluated at `node + shift`.
    Conformal { shift: [f64; 2] },
    /// A spatially constant matrix.
    Constant(Mat2),
}

impl Default for FrameModel {
    fn default() -> Self {
        FrameModel::Conformal { shift: [0.0, 0.0] }
    }
}

impl FrameModel {
    pub fn shift(&self) -> [f64; 2] {
        match self {
            FrameModel::Conformal { shift } => *shift,
            FrameModel::Constant(_) => [0.0, 0.0],
        }
    }

    /// Frame at an already shifted point.
    pub fn frame(&self, p: PlanePoint) -> Result<ConformalFrame> {
        match self {
            FrameModel::Conformal { .. } => frame_at(p),
            FrameModel::Constant(a) => ConformalFrame::synthetic(p, *a),
        }
    }

    pub fn jet(&self, p: PlanePoint) -> Result<FrameJet> {
        match self {
            FrameModel::Conformal { .. } => frame_jet(p),
            FrameModel::Constant(a) => Ok(FrameJet {
                frame: ConformalFrame::synthetic(p, *a)?,
                dx: Mat2::ZERO,
                dy: Mat2::ZERO,
            }),
        }
    }
}

/// `ñ = −J A J n`.
pub fn transform_normal(n: PlanePoint, frame: &ConformalFrame) -> PlanePoint {
    let m = -(Mat2::J * frame.a * Mat2::J);
    PlanePoint::from(m.mul_vec(n.to_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IdentityReport {
    /// `max ‖A Aᵀ − Q² I‖_max`
    pub gram: f64,
    /// `max ‖Q² A⁻¹ + J Aᵀ J‖_max`
    pub rotation: f64,
    pub samples: usize,
}

impl IdentityReport {
    pub fn max(&self) -> f64 {
        self.gram.max(self.rotation)
    }
}

pub fn check_frames(frames: &[ConformalFrame]) -> IdentityReport {
    let mut rep = IdentityReport {
        samples: frames.len(),
        ..Default::default()
    };
    for f in frames {
        let gram = f.a * f.a.transpose() - Mat2::diag(f.q2);
        let rot = f.a_inv.scale(f.q2) + Mat2::J * f.a.transpose() * Mat2::J;
        rep.gram = rep.gram.max(gram.max_abs());
        rep.rotation = rep.rotation.max(rot.max_abs());
    }
    rep
}

pub fn check_identities(samples: &[PlanePoint]) -> Result<IdentityReport> {
    let frames = samples
        .iter()
        .map(|p| frame_at(*p))
        .collect::<Result<Vec<_>>>()?;
    Ok(check_frames(&frames))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central-difference Jacobian of the principal root at `zt²`.
    fn fd_frame(zt: PlanePoint) -> Mat2 {
        let z = map_inverse(zt);
        let h = 1e-6 * z.norm();
        let f = |x: f64, y: f64| sqrt_nearest(PlanePoint::new(x, y), zt);
        let px = f(z.x + h, z.y);
        let mx = f(z.x - h, z.y);
        let py = f(z.x, z.y + h);
        let my = f(z.x, z.y - h);
        Mat2::new(
            (px.x - mx.x) / (2.0 * h),
            (py.x - my.x) / (2.0 * h),
            (px.y - mx.y) / (2.0 * h),
            (py.y - my.y) / (2.0 * h),
        )
    }

    #[test]
    fn forward_examples() {
        let cut = BranchCut::principal();
        assert_eq!(map_forward(PlanePoint::new(1.0, 0.0), &cut).unwrap(), PlanePoint::new(1.0, 0.0));
        let right = BranchCut::ray(0.0);
        let w = map_forward(PlanePoint::new(-1.0, 0.0), &right).unwrap();
        assert!(w.dist(&PlanePoint::new(0.0, 1.0)) < 1e-15);
        assert!(matches!(
            map_forward(PlanePoint::new(-2.0, 0.0), &cut),
            Err(Error::PointOnCut { .. })
        ));
    }

    #[test]
    fn branch_is_continuous_off_a_bent_cut() {
        let cut = BranchCut::polyline(&[PlanePoint::new(0.0, 1.0), PlanePoint::new(1.0, 2.0)]).unwrap();
        // walk a circle of radius 3 that crosses the cut once and the negative axis once
        let n = 2000;
        let mut prev: Option<PlanePoint> = None;
        let mut jumps = 0;
        for k in 0..=n {
            let t = 0.3 + 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let z = PlanePoint::new(3.0 * t.cos(), 3.0 * t.sin());
            let w = map_forward(z, &cut).unwrap();
            assert!(map_inverse(w).dist(&z) < 1e-12);
            if let Some(p) = prev {
                if p.dist(&w) > 0.5 {
                    jumps += 1;
                }
            }
            prev = Some(w);
        }
        assert_eq!(jumps, 1);
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(map_inverse(PlanePoint::new(1.0, 0.0)), PlanePoint::new(1.0, 0.0));
        assert_eq!(map_inverse(PlanePoint::new(0.0, 1.0)), PlanePoint::new(-1.0, 0.0));
        assert_eq!(map_inverse(PlanePoint::new(1.0, 1.0)), PlanePoint::new(0.0, 2.0));
    }

    #[test]
    fn frame_examples_match_fd_oracle() {
        for (p, q2) in [((1.0, 0.0), 0.25), ((0.0, 1.0), 0.25), ((2.0, 0.0), 1.0 / 16.0)] {
            let zt = PlanePoint::new(p.0, p.1);
            let f = frame_at(zt).unwrap();
            assert!((f.q2 - q2).abs() < 1e-15);
            assert!((f.a - fd_frame(zt)).max_abs() < 1e-8);
        }
        let f = frame_at(PlanePoint::new(0.0, 1.0)).unwrap();
        assert!((f.a - Mat2::new(0.0, 0.5, -0.5, 0.0)).max_abs() < 1e-16);
        assert!(matches!(frame_at(PlanePoint::ORIGIN), Err(Error::SingularPoint { .. })));
    }

    #[test]
    fn jet_matches_differences() {
        let zt = PlanePoint::new(0.7, -0.4);
        let j = frame_jet(zt).unwrap();
        let h = 1e-6;
        let a = |x: f64, y: f64| frame_at(PlanePoint::new(x, y)).unwrap().a;
        let dx = (a(zt.x + h, zt.y) - a(zt.x - h, zt.y)).scale(0.5 / h);
        let dy = (a(zt.x, zt.y + h) - a(zt.x, zt.y - h)).scale(0.5 / h);
        assert!((j.dx - dx).max_abs() < 1e-8);
        assert!((j.dy - dy).max_abs() < 1e-8);
    }

    #[test]
    fn normals() {
        let f = frame_at(PlanePoint::new(1.0, 0.0)).unwrap();
        let n = transform_normal(PlanePoint::new(0.0, 1.0), &f);
        assert!(n.dist(&PlanePoint::new(0.0, 0.5)) < 1e-16);
        let id = ConformalFrame::synthetic(PlanePoint::ORIGIN, Mat2::IDENTITY).unwrap();
        assert_eq!(transform_normal(PlanePoint::new(1.0, 0.0), &id), PlanePoint::new(1.0, 0.0));
    }

    #[test]
    fn inverse_is_scaled_transpose_off_the_axis() {
        let f = frame_at(PlanePoint::new(0.0, 1.0)).unwrap();
        let lhs = f.a_inv.scale(f.q2);
        assert!((lhs - f.a.transpose()).max_abs() < 1e-15);
        // −JAJ equals A itself for a conformal frame, so it differs from Q²A⁻¹ here
        assert!((lhs + Mat2::J * f.a * Mat2::J).max_abs() > 0.9);
        assert!(check_frames(&[f]).max() < 1e-15);
    }

    #[test]
    fn identity_report_detects_perturbation() {
        let rep = check_identities(&[PlanePoint::new(1.0, 0.0)]).unwrap();
        assert!(rep.max() < 1e-15);
        let mut f = frame_at(PlanePoint::new(1.0, 0.0)).unwrap();
        f.a.0[0][1] += 1e-3;
        let rep = check_frames(&[f]);
        assert!((rep.max() - 1e-3).abs() < 1e-4);
    }
}
