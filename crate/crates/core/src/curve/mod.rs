//! Closed-curve geometry: chord-arc constant, splash-curve classification,
//! self-intersections, the touching/crossing trichotomy of preimage curves and
//! tubular coordinates.

pub mod io;
pub mod sweep;

use std::f64::consts::{PI, TAU};

use crate::conformal::{map_inverse, PlanePoint, SINGULAR_RADIUS};
use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::spectral::{self, TrigInterpolant};

pub use sweep::{self_intersections, Crossing};

/// A closed curve sampled at uniform parameter values `α_k = k·period/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedCurve {
    points: Vec<PlanePoint>,
    period: f64,
}

impl ClosedCurve {
    pub const MIN_SAMPLES: usize = 16;

    pub fn new(points: Vec<PlanePoint>, period: f64) -> Result<Self> {
        if points.len() < Self::MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                found: points.len(),
                needed: Self::MIN_SAMPLES,
            });
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidInput(format!("curve period {period} must be positive")));
        }
        let n = points.len();
        for k in 0..n {
            let (p, q) = (points[k], points[(k + 1) % n]);
            if !p.is_finite() {
                return Err(Error::InvalidInput(format!("sample {k} is not finite")));
            }
            if p == q {
                return Err(Error::InvalidInput(format!("samples {k} and {} coincide", (k + 1) % n)));
            }
        }
        Ok(ClosedCurve { points, period })
    }

    /// Samples `f(α)` at `n` uniform parameters over `[0, 2π)`.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> PlanePoint) -> Result<Self> {
        let pts = (0..n).map(|k| f(TAU * k as f64 / n as f64)).collect();
        ClosedCurve::new(pts, TAU)
    }

    pub fn points(&self) -> &[PlanePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Parameter spacing.
    pub fn step(&self) -> f64 {
        self.period / self.points.len() as f64
    }

    pub fn param(&self, k: usize) -> f64 {
        self.step() * k as f64
    }

    /// Applies `f` to every sample.
    pub fn map(&self, f: impl Fn(PlanePoint) -> PlanePoint) -> Result<ClosedCurve> {
        ClosedCurve::new(self.points.iter().map(|p| f(*p)).collect(), self.period)
    }

    /// Shoelace area, positive for counter-clockwise curves.
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        0.5 * (0..n)
            .map(|k| {
                let (p, q) = (self.points[k], self.points[(k + 1) % n]);
                p.x * q.y - q.x * p.y
            })
            .sum::<f64>()
    }

    /// Diagonal of the bounding box.
    pub fn diameter(&self) -> f64 {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &self.points {
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
        }
        (x1 - x0).hypot(y1 - y0)
    }

    /// Periodic parameter distance between samples `i` and `j`, measured in the
    /// `2π` convention.
    pub fn param_distance(&self, i: usize, j: usize) -> f64 {
        let n = self.points.len();
        let d = i.abs_diff(j);
        TAU * d.min(n - d) as f64 / n as f64
    }
}

/// `min |z(α) − z(α′)| / ‖α − α′‖` over distinct sample pairs.
pub fn chord_arc_constant(c: &ClosedCurve) -> f64 {
    chord_arc_where(c, |_| true)
}

/// Chord-arc constant restricted to samples accepted by `keep`.
pub fn chord_arc_where(c: &ClosedCurve, keep: impl Fn(usize) -> bool) -> f64 {
    let p = c.points();
    let n = p.len();
    let idx: Vec<usize> = (0..n).filter(|&k| keep(k)).collect();
    let mut best = f64::INFINITY;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            best = best.min(p[i].dist(&p[j]) / c.param_distance(i, j));
        }
    }
    best
}

/// Per-sample differential geometry of a sampled curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveGeometry {
    /// `z_α`
    pub velocity: Vec<Vec2>,
    pub speed: Vec<f64>,
    /// Unit tangent `z_s`.
    pub tangent: Vec<Vec2>,
    /// Unit normal pointing out of the enclosed region.
    pub normal: Vec<Vec2>,
    /// Curvature, positive where the curve bends towards its interior.
    pub curvature: Vec<f64>,
    /// `+1` for counter-clockwise curves, `−1` otherwise.
    pub orientation: f64,
}

fn centered(values: &[f64], h: f64, order: u32) -> Vec<f64> {
    let n = values.len();
    let at = |k: isize| values[k.rem_euclid(n as isize) as usize];
    (0..n as isize)
        .map(|k| {
            let (m2, m1, z, p1, p2) = (at(k - 2), at(k - 1), at(k), at(k + 1), at(k + 2));
            if order == 1 {
                (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h)
            } else {
                (-m2 + 16.0 * m1 - 30.0 * z + 16.0 * p1 - p2) / (12.0 * h * h)
            }
        })
        .collect()
}

/// First and second parameter derivatives of the coordinates: spectral for
/// power-of-two sample counts, fourth-order centered otherwise.
fn parameter_derivatives(c: &ClosedCurve) -> [Vec<f64>; 4] {
    let xs: Vec<f64> = c.points().iter().map(|p| p.x).collect();
    let ys: Vec<f64> = c.points().iter().map(|p| p.y).collect();
    if c.len().is_power_of_two() {
        [
            spectral::derivative(&xs, c.period(), 1),
            spectral::derivative(&ys, c.period(), 1),
            spectral::derivative(&xs, c.period(), 2),
            spectral::derivative(&ys, c.period(), 2),
        ]
    } else {
        let h = c.step();
        [centered(&xs, h, 1), centered(&ys, h, 1), centered(&xs, h, 2), centered(&ys, h, 2)]
    }
}

fn speeds(c: &ClosedCurve) -> Vec<f64> {
    let [xa, ya, _, _] = parameter_derivatives(c);
    xa.iter().zip(&ya).map(|(x, y)| x.hypot(*y)).collect()
}

pub fn geometry(c: &ClosedCurve) -> Result<CurveGeometry> {
    let [xa, ya, xaa, yaa] = parameter_derivatives(c);
    let n = c.len();
    let orientation = if c.signed_area() >= 0.0 { 1.0 } else { -1.0 };
    let mean = xa.iter().zip(&ya).map(|(x, y)| x.hypot(*y)).sum::<f64>() / n as f64;
    let mut g = CurveGeometry {
        velocity: Vec::with_capacity(n),
        speed: Vec::with_capacity(n),
        tangent: Vec::with_capacity(n),
        normal: Vec::with_capacity(n),
        curvature: Vec::with_capacity(n),
        orientation,
    };
    for k in 0..n {
        let speed = xa[k].hypot(ya[k]);
        if !(speed > 1e-10 * mean) {
            return Err(Error::DegenerateTangent { index: k, speed });
        }
        let t = [xa[k] / speed, ya[k] / speed];
        g.velocity.push([xa[k], ya[k]]);
        g.speed.push(speed);
        g.tangent.push(t);
        g.normal.push([orientation * t[1], -orientation * t[0]]);
        g.curvature.push(orientation * (xa[k] * yaa[k] - ya[k] * xaa[k]) / speed.powi(3));
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplashStatus {
    RegularChordArc,
    SplashCurve,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplashVerdict {
    pub status: SplashStatus,
    /// Parameter pairs `(α, α′)` of near-touching samples, one per cluster.
    pub touch_pairs: Vec<(f64, f64)>,
    pub chord_arc_constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplashOptions {
    /// Chord below which two samples count as touching; also the lower bound
    /// on tangent magnitudes at a touch.
    pub pair_tol: f64,
    /// Chord-arc constant required once a touch point's neighbourhood is removed.
    pub floor: f64,
    /// Parameter radius of the removed neighbourhood.
    pub neighbourhood: f64,
}

impl SplashOptions {
    pub fn with_tolerance(pair_tol: f64) -> Self {
        SplashOptions {
            pair_tol,
            floor: 1e-2,
            neighbourhood: 0.3,
        }
    }
}

pub fn classify_splash(c: &ClosedCurve, pair_tol: f64) -> Result<SplashVerdict> {
    classify_splash_with(c, &SplashOptions::with_tolerance(pair_tol))
}

pub fn classify_splash_with(c: &ClosedCurve, opts: &SplashOptions) -> Result<SplashVerdict> {
    let n = c.len();
    if n < ClosedCurve::MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            found: n,
            needed: ClosedCurve::MIN_SAMPLES,
        });
    }
    let pts = c.points();
    let speed = speeds(c);
    let chord_arc = chord_arc_constant(c);

    // near-touching sample pairs, found through nearby segments
    let mut cands: Vec<(usize, usize, f64)> = Vec::new();
    for (i, j) in sweep::box_pairs(pts, opts.pair_tol) {
        for a in [i, (i + 1) % n] {
            for b in [j, (j + 1) % n] {
                if sweep::adjacent(a, b, n) {
                    continue;
                }
                let d = pts[a].dist(&pts[b]);
                if d < opts.pair_tol {
                    cands.push((a.min(b), a.max(b), d));
                }
            }
        }
    }
    cands.sort_by(|p, q| (p.0, p.1).cmp(&(q.0, q.1)));
    cands.dedup_by(|p, q| p.0 == q.0 && p.1 == q.1);

    let w = (n / 32).max(2);
    let near = |a: usize, b: usize| a.abs_diff(b).min(n - a.abs_diff(b)) <= w;
    let mut clusters: Vec<Vec<(usize, usize, f64)>> = Vec::new();
    for cand in cands {
        match clusters
            .iter_mut()
            .find(|cl| cl.iter().any(|m| near(m.0, cand.0) && near(m.1, cand.1)))
        {
            Some(cl) => cl.push(cand),
            None => clusters.push(vec![cand]),
        }
    }
    let reps: Vec<(usize, usize)> = clusters
        .iter()
        .map(|cl| {
            let best = cl.iter().min_by(|p, q| p.2.total_cmp(&q.2)).expect("clusters are non-empty");
            (best.0, best.1)
        })
        .collect();
    let touch_pairs: Vec<(f64, f64)> = reps.iter().map(|&(i, j)| (c.param(i), c.param(j))).collect();
    let verdict = |status| SplashVerdict {
        status,
        touch_pairs: touch_pairs.clone(),
        chord_arc_constant: chord_arc,
    };

    match reps.as_slice() {
        [] => Ok(verdict(SplashStatus::RegularChordArc)),
        [(i, j)] => {
            let (i, j) = (*i, *j);
            if c.param_distance(i, j) < opts.neighbourhood {
                return Ok(verdict(SplashStatus::Degenerate));
            }
            let window_min = |k: usize| {
                (0..=2 * w)
                    .map(|m| speed[(k + n + m - w) % n])
                    .fold(f64::INFINITY, f64::min)
            };
            if window_min(i) <= opts.pair_tol || window_min(j) <= opts.pair_tol {
                return Ok(verdict(SplashStatus::Degenerate));
            }
            let restored = [i, j].iter().all(|&k| {
                chord_arc_where(c, |m| c.param_distance(m, k) > opts.neighbourhood) >= opts.floor
            });
            if restored {
                Ok(verdict(SplashStatus::SplashCurve))
            } else {
                Ok(verdict(SplashStatus::Degenerate))
            }
        }
        _ => Ok(verdict(SplashStatus::Degenerate)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreimageKind {
    CaseASimple,
    CaseBTouching,
    CaseCCrossing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreimageCase {
    pub case: PreimageKind,
    /// Parameter pairs witnessing a touch or crossing.
    pub witnesses: Vec<(f64, f64)>,
    /// Closest approach between non-adjacent segments, if below `touch_tol`.
    pub min_distance: Option<f64>,
}

/// Squares every sample of a tilde curve, refusing samples near the origin.
pub fn preimage(tilde: &ClosedCurve) -> Result<ClosedCurve> {
    for (k, p) in tilde.points().iter().enumerate() {
        let r = p.norm();
        if r < SINGULAR_RADIUS {
            return Err(Error::CurveHitsSingularity { index: k, distance: r });
        }
    }
    tilde.map(map_inverse)
}

pub fn classify_preimage(tilde: &ClosedCurve, touch_tol: f64) -> Result<PreimageCase> {
    let image = preimage(tilde)?;
    classify_polyline(&image, touch_tol)
}

/// Trichotomy for an already mapped curve.
pub fn classify_polyline(image: &ClosedCurve, touch_tol: f64) -> Result<PreimageCase> {
    let crossings = self_intersections(image);
    if !crossings.is_empty() {
        return Ok(PreimageCase {
            case: PreimageKind::CaseCCrossing,
            witnesses: crossings.iter().map(|x| (x.alpha_a, x.alpha_b)).collect(),
            min_distance: Some(0.0),
        });
    }
    Ok(match sweep::closest_approach(image, touch_tol) {
        Some((d, a, b)) => PreimageCase {
            case: PreimageKind::CaseBTouching,
            witnesses: vec![(a, b)],
            min_distance: Some(d),
        },
        None => PreimageCase {
            case: PreimageKind::CaseASimple,
            witnesses: Vec::new(),
            min_distance: None,
        },
    })
}

/// Minimal distance between two index ranges of a closed polyline
/// (half-open, wrapping segment ranges).
pub fn arc_distance(c: &ClosedCurve, first: (usize, usize), second: (usize, usize)) -> f64 {
    let pts = c.points();
    let n = pts.len();
    let segs = |(a, b): (usize, usize)| {
        let len = (b + n - a) % n;
        (0..len).map(move |m| (a + m) % n)
    };
    let mut best = f64::INFINITY;
    for i in segs(first) {
        for j in segs(second) {
            let (d, _, _) =
                sweep::segment_distance(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]);
            best = best.min(d);
        }
    }
    best
}

/// Side of the curve the chart's `λ > 0` points to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartSign {
    Outward,
    Inward,
}

impl ChartSign {
    pub fn value(self) -> f64 {
        match self {
            ChartSign::Outward => 1.0,
            ChartSign::Inward => -1.0,
        }
    }
}

/// Point data of the base curve at arclength `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartFrame {
    pub point: PlanePoint,
    pub tangent: Vec2,
    /// Outward unit normal.
    pub normal: Vec2,
    pub curvature: f64,
}

/// Tubular coordinates `x(s, λ) = z(s) + σ λ N(s)` around a closed curve,
/// with `N` the outward normal and `s` arclength.
#[derive(Debug, Clone)]
pub struct TubularChart {
    x: TrigInterpolant,
    y: TrigInterpolant,
    speed: TrigInterpolant,
    period: f64,
    length: f64,
    half_width: f64,
    sign: f64,
    orientation: f64,
    max_curvature: f64,
}

impl TubularChart {
    pub fn new(base: &ClosedCurve, half_width: f64, sign: ChartSign) -> Result<Self> {
        let geo = geometry(base)?;
        let max_curvature = geo.curvature.iter().fold(0.0_f64, |m, k| m.max(k.abs()));
        if !(half_width > 0.0) || half_width * max_curvature >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "chart half-width {half_width} must lie in (0, 1/max|κ| = {})",
                1.0 / max_curvature
            )));
        }
        let xs: Vec<f64> = base.points().iter().map(|p| p.x).collect();
        let ys: Vec<f64> = base.points().iter().map(|p| p.y).collect();
        let speed = TrigInterpolant::new(&geo.speed, base.period());
        let length = speed.mean() * base.period();
        Ok(TubularChart {
            x: TrigInterpolant::new(&xs, base.period()),
            y: TrigInterpolant::new(&ys, base.period()),
            speed,
            period: base.period(),
            length,
            half_width,
            sign: sign.value(),
            orientation: geo.orientation,
            max_curvature,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn max_curvature(&self) -> f64 {
        self.max_curvature
    }

    /// Arclength from parameter 0 to `alpha`.
    pub fn arclength(&self, alpha: f64) -> f64 {
        self.speed.mean() * alpha + self.speed.periodic_integral(alpha)
    }

    /// Curve parameter at arclength `s`.
    pub fn alpha_of(&self, s: f64) -> f64 {
        let s = s.rem_euclid(self.length);
        let mut a = s / self.speed.mean();
        for _ in 0..50 {
            let da = (self.arclength(a) - s) / self.speed.eval(a)[0];
            a -= da;
            if da.abs() < 1e-15 * self.period {
                break;
            }
        }
        a
    }

    pub fn frame(&self, s: f64) -> ChartFrame {
        self.frame_at_alpha(self.alpha_of(s))
    }

    pub fn frame_at_alpha(&self, a: f64) -> ChartFrame {
        let [x, xa, xaa] = self.x.eval(a);
        let [y, ya, yaa] = self.y.eval(a);
        let sp = xa.hypot(ya);
        let t = [xa / sp, ya / sp];
        let o = self.orientation;
        ChartFrame {
            point: PlanePoint::new(x, y),
            tangent: t,
            normal: [o * t[1], -o * t[0]],
            curvature: o * (xa * yaa - ya * xaa) / sp.powi(3),
        }
    }

    /// Point and area Jacobian `1 + σλκ(s)`.
    pub fn eval(&self, s: f64, lambda: f64) -> Result<(PlanePoint, f64)> {
        if !(lambda.abs() <= self.half_width) {
            return Err(Error::OutsideChart {
                lambda,
                half_width: self.half_width,
            });
        }
        let f = self.frame(s);
        let sl = self.sign * lambda;
        Ok((
            PlanePoint::new(f.point.x + sl * f.normal[0], f.point.y + sl * f.normal[1]),
            1.0 + sl * f.curvature,
        ))
    }

    /// Chart coordinates `(s, λ)` of `p`, by Newton iteration from `s_guess`.
    pub fn locate(&self, p: PlanePoint, s_guess: f64) -> Result<(f64, f64)> {
        let mut a = self.alpha_of(s_guess);
        let mut lambda = 0.0;
        for _ in 0..60 {
            let f = self.frame_at_alpha(a);
            let sl = self.sign * lambda;
            let r = [
                p.x - f.point.x - sl * f.normal[0],
                p.y - f.point.y - sl * f.normal[1],
            ];
            let stretch = 1.0 + sl * f.curvature;
            let ds = (r[0] * f.tangent[0] + r[1] * f.tangent[1]) / stretch;
            let dl = self.sign * (r[0] * f.normal[0] + r[1] * f.normal[1]);
            a += ds / self.speed.eval(a)[0];
            lambda += dl;
            if ds.abs().max(dl.abs()) < 1e-14 * (1.0 + self.length) {
                break;
            }
        }
        if !(lambda.abs() <= self.half_width) {
            return Err(Error::OutsideChart {
                lambda,
                half_width: self.half_width,
            });
        }
        Ok((self.arclength(a.rem_euclid(self.period)), lambda))
    }
}

/// Point and area Jacobian of the tubular chart.
pub fn tubular_eval(chart: &TubularChart, s: f64, lambda: f64) -> Result<(PlanePoint, f64)> {
    chart.eval(s, lambda)
}

/// A point of the splash fixture: the image under `z̃ ↦ z̃²` of the bean
/// `exp(μ + a cos t + i b sin t)`.
pub fn bean_point(t: f64, mu: f64, a: f64, b: f64) -> PlanePoint {
    let r = (2.0 * (mu + a * t.cos())).exp();
    let th = 2.0 * b * t.sin();
    PlanePoint::new(r * th.cos(), r * th.sin())
}

/// The sampled splash fixture. Its two tips meet on the negative axis when
/// `b = π/2` and overlap beyond.
pub fn bean(n: usize, mu: f64, a: f64, b: f64) -> Result<ClosedCurve> {
    ClosedCurve::from_fn(n, |t| bean_point(t, mu, a, b))
}

/// `π/2`, the bean opening at which the physical tips touch.
pub const TOUCH_OPENING: f64 = PI / 2.0;
