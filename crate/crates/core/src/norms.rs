//! Discrete fractional space-time norms by Fourier multipliers.
//!
//! Spatial norms act on periodic samples: a line (boundary traces) or a
//! square box carrying the smooth extension of a disk field. Time histories
//! on `[0, T]` are extended evenly to period `2T`. With normalized DFT
//! coefficients `ĉ(m, ξ)`,
//! `‖f‖²_{H^r H^σ} = T·|box| Σ (1 + τ_m²)^r (1 + |ξ|²)^σ |ĉ(m, ξ)|²`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{DiscreteDomain, PolarGrid, ScalarField, VectorField};
use crate::spectral::{dft, wavenumber};

/// Periodic sampling of the spatial variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// A single value per time (pure time functions).
    Point,
    /// `n` samples of `[0, period)`.
    Line { period: f64 },
    /// `n × n` samples of a square of side `length`, row-major.
    Box { n: usize, length: f64 },
}

impl Shape {
    fn measure(&self) -> f64 {
        match *self {
            Shape::Point => 1.0,
            Shape::Line { period } => period,
            Shape::Box { length, .. } => length * length,
        }
    }

    /// Normalized spectrum and `1 + |ξ|²` per coefficient.
    fn spectrum(&self, samples: &[f64]) -> (Vec<Complex64>, Vec<f64>) {
        match *self {
            Shape::Point => (vec![Complex64::new(samples[0], 0.0)], vec![1.0]),
            Shape::Line { period } => {
                let n = samples.len();
                let w = TAU / period;
                let xi = (0..n).map(|k| 1.0 + (w * wavenumber(k, n)).powi(2)).collect();
                (dft(samples), xi)
            }
            Shape::Box { n, length } => {
                let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                let mut planner = FftPlanner::new();
                let fft = planner.plan_fft_forward(n);
                buf.chunks_mut(n).for_each(|row| fft.process(row));
                let mut col = vec![Complex64::new(0.0, 0.0); n];
                for c in 0..n {
                    (0..n).for_each(|r| col[r] = buf[r * n + c]);
                    fft.process(&mut col);
                    (0..n).for_each(|r| buf[r * n + c] = col[r]);
                }
                let s = 1.0 / (n * n) as f64;
                buf.iter_mut().for_each(|c| *c *= s);
                let w = TAU / length;
                let xi = (0..n * n)
                    .map(|i| {
                        let (a, b) = (wavenumber(i / n, n), wavenumber(i % n, n));
                        1.0 + w * w * (a * a + b * b)
                    })
                    .collect();
                (buf, xi)
            }
        }
    }
}

/// `(Σ (1 + |ξ|²)^s |f̂|²)^{1/2}` scaled to the sampled measure, summed over
/// components.
pub fn spatial_sobolev_norm(components: &[Vec<f64>], shape: Shape, s: f64) -> f64 {
    let total: f64 = components
        .iter()
        .map(|c| {
            let (f, xi) = shape.spectrum(c);
            f.iter().zip(&xi).map(|(c, x)| x.powf(s) * c.norm_sqr()).sum::<f64>()
        })
        .sum();
    (shape.measure() * total).sqrt()
}

/// Uniformly sampled history `frames[k][component][sample]` on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub shape: Shape,
    pub t_end: f64,
    pub frames: Vec<Vec<Vec<f64>>>,
}

impl History {
    pub fn new(shape: Shape, t_end: f64, frames: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if !(t_end > 0.0) || frames.is_empty() {
            return Err(Error::InvalidInput("history needs T > 0 and at least one frame".into()));
        }
        Ok(History { shape, t_end, frames })
    }

    /// A scalar time function.
    pub fn scalar(t_end: f64, values: &[f64]) -> Result<Self> {
        History::new(Shape::Point, t_end, values.iter().map(|v| vec![vec![*v]]).collect())
    }

    pub fn steps(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        if self.steps() == 0 {
            0.0
        } else {
            self.t_end * k as f64 / self.steps() as f64
        }
    }

    pub fn difference(&self, other: &History) -> Result<History> {
        if self.shape != other.shape || self.frames.len() != other.frames.len() {
            return Err(Error::InvalidInput("histories differ in shape or length".into()));
        }
        let frames = self
            .frames
            .iter()
            .zip(&other.frames)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect())
            .collect();
        History::new(self.shape, self.t_end, frames)
    }
}

/// `‖f‖_{H^r([0,T]; H^σ)}` with the even temporal extension.
pub fn mixed_norm(h: &History, r: f64, sigma: f64) -> f64 {
    let k = h.steps();
    let ncomp = h.frames[0].len();
    let mut total = 0.0;
    for c in 0..ncomp {
        let spectra: Vec<(Vec<Complex64>, Vec<f64>)> = h.frames.iter().map(|f| h.shape.spectrum(&f[c])).collect();
        let xi = &spectra[0].1;
        if k == 0 {
            total += spectra[0].0.iter().zip(xi).map(|(c, x)| x.powf(sigma) * c.norm_sqr()).sum::<f64>();
            continue;
        }
        let len = 2 * k;
        let fft = FftPlanner::new().plan_fft_forward(len);
        let w = TAU / (2.0 * h.t_end);
        let tau: Vec<f64> = (0..len).map(|m| (1.0 + (w * wavenumber(m, len)).powi(2)).powf(r)).collect();
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for (mode, x) in xi.iter().enumerate() {
            for (j, b) in buf.iter_mut().enumerate() {
                let src = if j <= k { j } else { len - j };
                *b = spectra[src].0[mode];
            }
            fft.process(&mut buf);
            let s = 1.0 / len as f64;
            let e: f64 = buf.iter().zip(&tau).map(|(c, t)| t * (c * s).norm_sqr()).sum();
            total += x.powf(sigma) * e;
        }
    }
    let time_measure = if k == 0 { 1.0 } else { h.t_end };
    (time_measure * h.shape.measure() * total).sqrt()
}

/// `sup_{t > 0} t^{−1/4} ‖f(t)‖_{H^σ}`; a nonzero `f(0)` makes it infinite.
pub fn linf_quarter(h: &History, sigma: f64) -> f64 {
    let zero_start = h.frames[0].iter().flatten().all(|v| *v == 0.0);
    let start = if zero_start { 1 } else { return f64::INFINITY };
    (start..h.frames.len())
        .map(|k| h.time(k).powf(-0.25) * spatial_sobolev_norm(&h.frames[k], h.shape, sigma))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `L²H^s ∩ H^{s/2}L²`
    Ht,
    /// `L²H^s ∩ H^{(s+1)/2}H^{−1}`
    HbarHt,
    /// `L^∞_{1/4}H^{s+1} ∩ H²H^γ`
    F,
    /// `sup t^{−1/4}‖f(t)‖_{L²}`
    LinfQuarter,
    /// `sup_t ‖f(t)‖_{H^s}`
    SobolevSpatial,
    /// `H^s([0, T]; L²)`
    SobolevTemporal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSpec {
    pub kind: NormKind,
    pub s: f64,
    pub gamma: f64,
}

/// Default gap between `γ` and `s − 1` in the F-spaces.
pub const GAMMA_GAP: f64 = 0.05;

impl NormSpec {
    pub fn new(kind: NormKind, s: f64) -> Self {
        NormSpec {
            kind,
            s,
            gamma: s - 1.0 - GAMMA_GAP,
        }
    }

    pub fn with_gamma(kind: NormKind, s: f64, gamma: f64) -> Result<Self> {
        if kind == NormKind::F && !(gamma < s - 1.0 && gamma > s - 1.5) {
            return Err(Error::OutOfRange {
                what: "γ",
                value: gamma,
                range: "(s − 1 − ε, s − 1) with ε < 1/2",
            });
        }
        Ok(NormSpec { kind, s, gamma })
    }
}

pub fn parabolic_norm(h: &History, spec: &NormSpec) -> f64 {
    let s = spec.s;
    match spec.kind {
        NormKind::Ht => mixed_norm(h, 0.0, s) + mixed_norm(h, 0.5 * s, 0.0),
        NormKind::HbarHt => mixed_norm(h, 0.0, s) + mixed_norm(h, 0.5 * (s + 1.0), -1.0),
        NormKind::F => linf_quarter(h, s + 1.0) + mixed_norm(h, 2.0, spec.gamma),
        NormKind::LinfQuarter => linf_quarter(h, 0.0),
        NormKind::SobolevSpatial => h
            .frames
            .iter()
            .map(|f| spatial_sobolev_norm(f, h.shape, s))
            .fold(0.0, f64::max),
        NormKind::SobolevTemporal => mixed_norm(h, s, 0.0),
    }
}

/// Smooth extension of disk fields to a periodic box in reference
/// coordinates: 4×4 Lagrange interpolation in `(ρ, θ)` inside, the reflection
/// `f(1 + r) = 3f(1 − r) − 2f(1 − 2r)` times a cutoff outside.
#[derive(Debug, Clone)]
pub struct DiskExtension {
    n: usize,
    length: f64,
    stencils: Vec<Vec<(usize, f64)>>,
}

/// Width of the reflected collar outside the unit circle.
const COLLAR: f64 = 0.4;

fn lagrange4(x: f64) -> [f64; 4] {
    // nodes −1, 0, 1, 2
    [
        -x * (x - 1.0) * (x - 2.0) / 6.0,
        (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0,
        -(x + 1.0) * x * (x - 2.0) / 2.0,
        (x + 1.0) * x * (x - 1.0) / 6.0,
    ]
}

fn collar_cutoff(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        1.0 - x.powi(5) * (126.0 + x * (-420.0 + x * (540.0 + x * (-315.0 + 70.0 * x))))
    }
}

fn interp_stencil(grid: &PolarGrid, rho: f64, theta: f64, scale: f64, out: &mut Vec<(usize, f64)>) {
    let (nr, nt) = (grid.rings() as isize, grid.angles());
    let h = grid.drho();
    // ring i sits at (i + ½)h for all i < nr, the last one at 1 = (nr − ½)h
    let x = rho / h - 0.5;
    let base = (x.floor() as isize).clamp(-1, nr - 3);
    let wr = lagrange4(x - base as f64);
    let dt = grid.dtheta();
    let y = theta.rem_euclid(TAU) / dt;
    let jb = y.floor() as isize;
    let wt = lagrange4(y - jb as f64);
    for (a, wa) in wr.iter().enumerate() {
        let ring = base - 1 + a as isize;
        let (ring, shift) = if ring < 0 { ((-ring - 1) as usize, nt / 2) } else { (ring as usize, 0) };
        for (b, wb) in wt.iter().enumerate() {
            let j = ((jb - 1 + b as isize).rem_euclid(nt as isize) as usize + shift) % nt;
            out.push((grid.index(ring, j), scale * wa * wb));
        }
    }
}

impl DiskExtension {
    /// Box of side `2(1 + COLLAR)` sampled `n × n`.
    pub fn new(grid: &PolarGrid, n: usize) -> Result<Self> {
        if grid.angles() % 2 != 0 || grid.rings() < 4 || n < 8 {
            return Err(Error::InvalidInput("extension needs an even angle count, 4 rings and n ≥ 8".into()));
        }
        let length = 2.0 * (1.0 + COLLAR);
        let step = length / n as f64;
        let stencils = (0..n * n)
            .map(|i| {
                let x = -0.5 * length + step * (i % n) as f64;
                let y = -0.5 * length + step * (i / n) as f64;
                let rho = x.hypot(y);
                let theta = y.atan2(x);
                let mut st = Vec::new();
                if rho <= 1.0 {
                    interp_stencil(grid, rho, theta, 1.0, &mut st);
                } else if rho < 1.0 + COLLAR {
                    let r = rho - 1.0;
                    let c = collar_cutoff(r / COLLAR);
                    interp_stencil(grid, 1.0 - r, theta, 3.0 * c, &mut st);
                    interp_stencil(grid, 1.0 - 2.0 * r, theta, -2.0 * c, &mut st);
                }
                st
            })
            .collect();
        Ok(DiskExtension { n, length, stencils })
    }

    pub fn shape(&self) -> Shape {
        Shape::Box {
            n: self.n,
            length: self.length,
        }
    }

    pub fn extend(&self, f: &[f64]) -> Vec<f64> {
        self.stencils.iter().map(|st| st.iter().map(|(i, w)| w * f[*i]).sum()).collect()
    }

    pub fn extend_vector(&self, v: &VectorField) -> Vec<Vec<f64>> {
        vec![self.extend(v.component(0)), self.extend(v.component(1))]
    }

    pub fn scalar_history(&self, t_end: f64, fields: &[ScalarField]) -> Result<History> {
        History::new(self.shape(), t_end, fields.iter().map(|f| vec![self.extend(f)]).collect())
    }

    pub fn vector_history(&self, t_end: f64, fields: &[VectorField]) -> Result<History> {
        History::new(self.shape(), t_end, fields.iter().map(|f| self.extend_vector(f)).collect())
    }
}

/// Proxy of the pressure space `H^{ht,s}_{pr}`:
/// `sup_t ‖∇q‖_{L²} + ‖∇q‖_{H^{ht,s−1}} + |q|_{H^{ht,s−1/2}(∂Ω)}`.
pub fn pressure_norm(dom: &DiscreteDomain, ext: &DiskExtension, t_end: f64, q: &[ScalarField], s: f64) -> Result<f64> {
    let grads: Vec<Vec<Vec<f64>>> = q
        .iter()
        .map(|qk| {
            let g = dom.gradient_scalar(qk);
            let (a, b): (Vec<f64>, Vec<f64>) = g.iter().map(|v| (v[0], v[1])).unzip();
            vec![ext.extend(&a), ext.extend(&b)]
        })
        .collect();
    let gh = History::new(ext.shape(), t_end, grads)?;
    let sup = gh
        .frames
        .iter()
        .map(|f| spatial_sobolev_norm(f, gh.shape, 0.0))
        .fold(0.0, f64::max);
    let trace = History::new(
        Shape::Line { period: TAU },
        t_end,
        q.iter().map(|qk| vec![dom.boundary().map(|b| qk[b]).collect()]).collect(),
    )?;
    Ok(sup + parabolic_norm(&gh, &NormSpec::new(NormKind::Ht, s - 1.0)) + parabolic_norm(&trace, &NormSpec::new(NormKind::Ht, s - 0.5)))
}

/// Exponent bookkeeping of one Young's inequality step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentCheck {
    pub s: f64,
    pub case: u8,
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
    /// `|1/p + 1/q − 1|`
    pub conjugacy: f64,
    /// Defect of the spatial exponent matching the `L²H^{s+1}` weight.
    pub spatial_match: f64,
    /// Defect of the temporal exponent matching the `H²` weight.
    pub temporal_match: f64,
    /// The lower bound on `γ` and the default `γ`.
    pub gamma_floor: f64,
    pub gamma: f64,
    pub side_condition: bool,
}

impl ExponentCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.conjugacy <= tol && self.spatial_match <= tol && self.temporal_match <= tol && self.side_condition
    }
}

/// Cases 2 and 4 of the interpolation estimates for `2 < s < 5/2`.
pub fn bestiario_exponents(s: f64) -> Result<[ExponentCheck; 2]> {
    if !(s > 2.0 && s < 2.5) {
        return Err(Error::OutOfRange {
            what: "s",
            value: s,
            range: "(2, 2.5)",
        });
    }
    let gamma = s - 1.0 - GAMMA_GAP;
    // case 2: |τ|^{s+1}|ξ|² ≤ C(|ξ|^{2λp} + |τ|^{(s+1)q}|ξ|^{2(1−λ)q})
    let (q2, p2) = (4.0 / (s + 1.0), 4.0 / (3.0 - s));
    let l2 = (s + 1.0) * (3.0 - s) / 4.0;
    let floor2 = (1.0 - l2) * q2;
    // case 4: |τ|^{s−1/2}|ξ|⁴ ≤ C(|ξ|^{4λp} + |τ|^{(s−1/2)q}|ξ|^{4(1−λ)q})
    let (q4, p4) = (4.0 / (s - 0.5), 4.0 / (4.5 - s));
    let l4 = (s + 1.0) * (9.0 - 2.0 * s) / 16.0;
    let floor4 = 2.0 * (1.0 - l4) * q4;
    Ok([
        ExponentCheck {
            s,
            case: 2,
            p: p2,
            q: q2,
            lambda: l2,
            conjugacy: (1.0 / p2 + 1.0 / q2 - 1.0).abs(),
            spatial_match: (2.0 * l2 * p2 - 2.0 * (s + 1.0)).abs(),
            temporal_match: ((s + 1.0) * q2 - 4.0).abs(),
            gamma_floor: floor2,
            gamma,
            side_condition: floor2 < gamma && gamma < s - 1.0 && s > 1.0,
        },
        ExponentCheck {
            s,
            case: 4,
            p: p4,
            q: q4,
            lambda: l4,
            conjugacy: (1.0 / p4 + 1.0 / q4 - 1.0).abs(),
            spatial_match: (4.0 * l4 * p4 - 2.0 * (s + 1.0)).abs(),
            temporal_match: ((s - 0.5) * q4 - 4.0).abs(),
            gamma_floor: floor4,
            gamma,
            side_condition: floor4 < gamma && gamma < s - 1.0 && s > 1.5,
        },
    ])
}

/// `‖vw‖_{L²} / (‖v‖_{H^{1/q}} ‖w‖_{H^{1/p}})` on periodic samples, per pair.
pub fn product_probe(pairs: &[(Vec<f64>, Vec<f64>)], period: f64, p: f64) -> Result<Vec<f64>> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::OutOfRange {
            what: "p",
            value: p,
            range: "(1, ∞)",
        });
    }
    let q = p / (p - 1.0);
    let shape = Shape::Line { period };
    Ok(pairs
        .iter()
        .map(|(v, w)| {
            let vw: Vec<f64> = v.iter().zip(w).map(|(a, b)| a * b).collect();
            spatial_sobolev_norm(&[vw], shape, 0.0)
                / (spatial_sobolev_norm(&[v.clone()], shape, 1.0 / q) * spatial_sobolev_norm(&[w.clone()], shape, 1.0 / p))
        })
        .collect())
}

/// `‖∫₀ᵗ v‖_{H^{s+1−ε}} / (T^ε ‖v‖_{H^s})` in time, per member.
pub fn integral_probe(family: &[Vec<f64>], t_end: f64, s: f64, eps: f64) -> Result<Vec<f64>> {
    family
        .iter()
        .map(|v| {
            let k = v.len().saturating_sub(1).max(1);
            let dt = t_end / k as f64;
            let mut acc = 0.0;
            let mut integral = vec![0.0];
            for j in 1..v.len() {
                acc += 0.5 * dt * (v[j - 1] + v[j]);
                integral.push(acc);
            }
            let num = mixed_norm(&History::scalar(t_end, &integral)?, s + 1.0 - eps, 0.0);
            let den = t_end.powf(eps) * mixed_norm(&History::scalar(t_end, v)?, s, 0.0);
            Ok(num / den)
        })
        .collect()
}

/// `√π`, the `L²` norm of `sin(kα)` on `[0, 2π)`.
pub const SINE_L2: f64 = 1.772_453_850_905_516;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sine(k: f64, n: usize) -> Vec<f64> {
        (0..n).map(|j| (k * TAU * j as f64 / n as f64).sin()).collect()
    }

    #[test]
    fn sine_norms() {
        let line = Shape::Line { period: TAU };
        assert!((spatial_sobolev_norm(&[sine(2.0, 64)], line, 0.0) - PI.sqrt()).abs() < 1e-12);
        assert!((SINE_L2 - PI.sqrt()).abs() < 1e-15);
        assert!((spatial_sobolev_norm(&[sine(3.0, 64)], line, 1.0) - (10.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_order_norm_is_discrete_l2() {
        let n = 16;
        let f: Vec<f64> = (0..n * n).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let shape = Shape::Box { n, length: 3.0 };
        let h = 3.0 / n as f64;
        let l2 = (h * h * f.iter().map(|v| v * v).sum::<f64>()).sqrt();
        assert!((spatial_sobolev_norm(&[f], shape, 0.0) - l2).abs() < 1e-12 * l2);
    }

    #[test]
    fn separable_history() {
        let (k, n, t_end) = (8, 32, 0.7);
        let a: Vec<f64> = (0..=k).map(|j| (1.3 * j as f64 / k as f64).cos() + 0.2).collect();
        let b = sine(3.0, n);
        let line = Shape::Line { period: TAU };
        let h = History::new(line, t_end, a.iter().map(|ai| vec![b.iter().map(|v| ai * v).collect()]).collect()).unwrap();
        let ha = History::scalar(t_end, &a).unwrap();
        let s = 2.25;
        let want = mixed_norm(&ha, 0.0, 0.0) * spatial_sobolev_norm(&[b.clone()], line, s)
            + mixed_norm(&ha, 0.5 * s, 0.0) * spatial_sobolev_norm(&[b], line, 0.0);
        let got = parabolic_norm(&h, &NormSpec::new(NormKind::Ht, s));
        assert!((got - want).abs() < 1e-12 * want);
    }

    #[test]
    fn quarter_weight_of_root() {
        let k = 64;
        let v: Vec<f64> = (0..=k).map(|j| (j as f64 / k as f64).sqrt()).collect();
        let h = History::scalar(1.0, &v).unwrap();
        assert!((parabolic_norm(&h, &NormSpec::new(NormKind::LinfQuarter, 0.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_history_has_zero_norms() {
        let h = History::new(Shape::Line { period: TAU }, 1.0, vec![vec![vec![0.0; 16]]; 5]).unwrap();
        for kind in [NormKind::Ht, NormKind::HbarHt, NormKind::F, NormKind::LinfQuarter, NormKind::SobolevSpatial, NormKind::SobolevTemporal] {
            assert_eq!(parabolic_norm(&h, &NormSpec::new(kind, 2.25)), 0.0);
        }
    }

    #[test]
    fn bestiario_worked_values() {
        let [c2, _] = bestiario_exponents(2.2).unwrap();
        assert!((c2.q - 1.25).abs() < 1e-15 && (c2.p - 5.0).abs() < 1e-14 && (c2.lambda - 0.64).abs() < 1e-15);
        let [_, c4] = bestiario_exponents(2.4).unwrap();
        assert!((c4.q - 4.0 / 1.9).abs() < 1e-15 && (c4.p - 4.0 / 2.1).abs() < 1e-15);
        assert!(c2.passes(1e-14) && c4.passes(1e-14));
        assert!(bestiario_exponents(2.5).is_err());
    }

    #[test]
    fn gamma_must_sit_below_s_minus_one() {
        assert!(NormSpec::with_gamma(NormKind::F, 2.25, 1.25).is_err());
        assert!(NormSpec::with_gamma(NormKind::F, 2.25, 1.2).is_ok());
    }

    #[test]
    fn product_probe_constants_and_sweep() {
        let n = 256;
        let ones = vec![1.0; n];
        let r = product_probe(&[(ones.clone(), ones)], TAU, 2.0).unwrap();
        // ‖1‖_{L²} / ‖1‖² = 1/√(2π)
        assert!((r[0] - 1.0 / TAU.sqrt()).abs() < 1e-12);
        let fam: Vec<(Vec<f64>, Vec<f64>)> = (1..=64).map(|k| (sine(k as f64, n), sine(k as f64, n))).collect();
        let ratios = product_probe(&fam, TAU, 2.0).unwrap();
        assert!(ratios.iter().all(|r| r.is_finite() && *r < 1.0));
    }

    #[test]
    fn integral_probe_is_bounded() {
        let fam: Vec<Vec<f64>> = (1..=8).map(|m| (0..=64).map(|j| (m as f64 * j as f64 / 64.0).sin()).collect()).collect();
        let r = integral_probe(&fam, 1.0, 1.0, 0.1).unwrap();
        assert!(r.iter().all(|v| v.is_finite() && *v < 10.0), "{r:?}");
    }

    #[test]
    fn disk_extension_reproduces_interior_values() {
        let grid = PolarGrid::new(12, 32).unwrap();
        let ext = DiskExtension::new(&grid, 48).unwrap();
        let f: Vec<f64> = (0..grid.len())
            .map(|i| {
                let p = grid.reference_point(i);
                1.0 + p[0] - 0.5 * p[1] * p[1]
            })
            .collect();
        let e = ext.extend(&f);
        let step = 2.8 / 48.0;
        for (i, v) in e.iter().enumerate() {
            let (x, y) = (-1.4 + step * (i % 48) as f64, -1.4 + step * (i / 48) as f64);
            if x.hypot(y) < 0.95 {
                assert!((v - (1.0 + x - 0.5 * y * y)).abs() < 1e-3, "{x} {y} {v}");
            }
            if x.hypot(y) > 1.4 {
                assert_eq!(*v, 0.0);
            }
        }
    }

    proptest! {
        #[test]
        fn homogeneous_and_triangle(a in proptest::collection::vec(-1.0f64..1.0, 17), b in proptest::collection::vec(-1.0f64..1.0, 17), c in -3.0f64..3.0, s in 0.0f64..3.0) {
            let line = Shape::Line { period: 2.0 };
            let na = spatial_sobolev_norm(&[a.clone()], line, s);
            let ca: Vec<f64> = a.iter().map(|v| c * v).collect();
            prop_assert!((spatial_sobolev_norm(&[ca], line, s) - c.abs() * na).abs() < 1e-10 * (1.0 + na));
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let nb = spatial_sobolev_norm(&[b.clone()], line, s);
            prop_assert!(spatial_sobolev_norm(&[sum], line, s) <= na + nb + 1e-10);
            let h = History::new(line, 1.0, vec![vec![a.clone()], vec![b.clone()], vec![a.clone()]]).unwrap();
            let lo = parabolic_norm(&h, &NormSpec::new(NormKind::Ht, s));
            let hi = parabolic_norm(&h, &NormSpec::new(NormKind::Ht, s + 0.5));
            prop_assert!(lo <= hi + 1e-10);
        }

        #[test]
        fn conjugacy_on_the_whole_range(s in 2.0001f64..2.4999) {
            for c in bestiario_exponents(s).unwrap() {
                prop_assert!(c.passes(1e-14), "{c:?}");
            }
        }
    }
}
