//! Initial velocities `v₀ = ∇^⊥ψ = (∂₂ψ, −∂₁ψ)` from boundary stream data.
//!
//! The stream is built on the tilde grid, where `v₀ = −JAᵀ∇ψ`. Along each
//! grid ray `ψ = ψ₀ + ψ₁ d + ½ψ₂ d²`, blended by a cutoff into the mean of
//! `ψ₀`. `ψ₁` makes the normal derivative vanish and `ψ₂` cancels the
//! tangential stress of the first two terms, so `v₀·n = ∂_sψ₀` and the
//! stress condition holds to discretization order.

use std::f64::consts::TAU;

use crate::conformal::{map_inverse, PlanePoint};
use crate::elliptic::{a_divergence, grad_a, symmetric, Projector};
use crate::error::{Error, Result};
use crate::grid::{DiscreteDomain, ScalarField, VectorField};
use crate::linalg::{perp, Vec2};
use crate::spectral::derivative;
use crate::stokes::{adjust_divergence, blend_width, ray_stream_gradient, ray_stream_values};

/// Boundary stream values at the boundary nodes with their physical
/// arclength derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryStream {
    pub psi0: Vec<f64>,
    /// `∂_sψ₀`, the normal velocity on the boundary.
    pub psi_s: Vec<f64>,
    /// `∂²_sψ₀`, the second normal derivative that cancels the tangential
    /// stress in a boundary-normal chart.
    pub psi2: Vec<f64>,
    /// Physical arclength position of each boundary node.
    pub arclength: Vec<f64>,
}

/// Physical boundary points `P⁻¹(z̃)` of the boundary nodes.
pub fn physical_boundary(dom: &DiscreteDomain) -> Vec<PlanePoint> {
    dom.boundary().map(|b| map_inverse(dom.nodes()[b])).collect()
}

/// `|dz/dθ|` and its θ-derivative along the physical boundary.
fn physical_speed(dom: &DiscreteDomain) -> (Vec<f64>, Vec<f64>) {
    let pts = physical_boundary(dom);
    let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
    let (dx, dy) = (derivative(&xs, TAU, 1), derivative(&ys, TAU, 1));
    let speed: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| a.hypot(*b)).collect();
    let slope = derivative(&speed, TAU, 1);
    (speed, slope)
}

impl BoundaryStream {
    pub fn new(dom: &DiscreteDomain, psi0: Vec<f64>) -> Result<Self> {
        let nt = dom.grid().angles();
        if psi0.len() != nt {
            return Err(Error::InvalidInput(format!("ψ₀ has {} samples, the boundary {nt}", psi0.len())));
        }
        if psi0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite ψ₀".into()));
        }
        let (speed, slope) = physical_speed(dom);
        let d1 = derivative(&psi0, TAU, 1);
        let d2 = derivative(&psi0, TAU, 2);
        let psi_s = d1.iter().zip(&speed).map(|(d, s)| d / s).collect();
        let psi2 = (0..nt).map(|j| (d2[j] * speed[j] - d1[j] * slope[j]) / speed[j].powi(3)).collect();
        let dtheta = TAU / nt as f64;
        let mut arclength = Vec::with_capacity(nt);
        let mut acc = 0.0;
        for j in 0..nt {
            arclength.push(acc);
            // trapezoid on a spectrally smooth speed
            acc += 0.5 * dtheta * (speed[j] + speed[(j + 1) % nt]);
        }
        Ok(BoundaryStream {
            psi0,
            psi_s,
            psi2,
            arclength,
        })
    }

    /// Samples `ψ₀` as a function of the physical arclength fraction
    /// `s/L ∈ [0, 1)` of each boundary node.
    pub fn from_fn(dom: &DiscreteDomain, f: impl Fn(f64) -> f64) -> Result<Self> {
        let nt = dom.grid().angles();
        let tmp = BoundaryStream::new(dom, vec![0.0; nt])?;
        let total = tmp.length(dom);
        BoundaryStream::new(dom, tmp.arclength.iter().map(|s| f(s / total)).collect())
    }

    /// Physical perimeter.
    pub fn length(&self, dom: &DiscreteDomain) -> f64 {
        let (speed, _) = physical_speed(dom);
        speed.iter().sum::<f64>() * TAU / speed.len() as f64
    }
}

/// A stream on the tilde grid with its velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialVelocity {
    pub stream: BoundaryStream,
    pub psi: ScalarField,
    pub v0: VectorField,
}

/// `v = −JAᵀ∇ψ` from a tilde gradient.
fn velocity_of(dom: &DiscreteDomain, grad: &[Vec2]) -> VectorField {
    VectorField::from_fn(dom.len(), |i| {
        let w = perp(dom.frame(i).a.transpose().mul_vec(grad[i]));
        [-w[0], -w[1]]
    })
}

/// `t'ᵀ S n'` per boundary node, `n' = A⁻¹ñ₀`.
fn tangential_stress(dom: &DiscreteDomain, v: &VectorField) -> Vec<f64> {
    let ga = grad_a(dom, v);
    dom.boundary()
        .map(|b| {
            let n = dom.stress_normal(b);
            let t = perp(n);
            let sn = symmetric(ga[b]).mul_vec(n);
            t[0] * sn[0] + t[1] * sn[1]
        })
        .collect()
}

/// Builds the stream of `stream` with blend `width` in the reference
/// radius (default [`blend_width`]).
pub fn build_stream(dom: &DiscreteDomain, stream: BoundaryStream, width: Option<f64>) -> Result<InitialVelocity> {
    let width = width.unwrap_or_else(|| blend_width(dom));
    let floor = 3.0 * dom.grid().drho();
    if !(width >= floor && width <= 1.0) {
        return Err(Error::ChartTooNarrow {
            blend: width,
            half_width: floor,
        });
    }
    let grid = dom.grid();
    let nt = grid.angles();
    let far = stream.psi0.iter().sum::<f64>() / nt as f64;
    let d0 = derivative(&stream.psi0, TAU, 1);
    // ∂_ñψ = ψ₀'(∇θ·ñ) − ψ₁ = 0
    let psi1: Vec<f64> = (0..nt)
        .map(|j| {
            let grad_theta = dom.metric(j).inv.transpose().mul_vec(perp(grid.reference_point(j)));
            let n = dom.normal(j);
            d0[j] * (grad_theta[0] * n[0] + grad_theta[1] * n[1])
        })
        .collect();
    let zero = vec![0.0; nt];
    let base = velocity_of(dom, &ray_stream_gradient(dom, [&stream.psi0, &psi1, &zero], far, width));
    // ½ψ₂d² contributes −ψ₂ to t'ᵀSn'
    let psi2 = tangential_stress(dom, &base);
    let coeffs = [stream.psi0.as_slice(), &psi1, &psi2];
    let v0 = velocity_of(dom, &ray_stream_gradient(dom, coeffs, far, width));
    let psi = ScalarField(ray_stream_values(dom, coeffs, far, width));
    Ok(InitialVelocity { stream, psi, v0 })
}

/// Restores the `t = 0` compatibility of a velocity carried to a new domain:
/// removes the interior A-divergence, then cancels the tangential stress
/// with a boundary-layer stream `½ψ₂d²`. The normal velocity is unchanged.
pub fn restore_compatibility(dom: &DiscreteDomain, v: &VectorField, width: Option<f64>) -> Result<VectorField> {
    let width = width.unwrap_or_else(|| blend_width(dom));
    let proj = Projector::new(dom)?;
    let solenoidal = adjust_divergence(dom, &proj, v, &vec![0.0; dom.len()])?;
    let psi2 = tangential_stress(dom, &solenoidal);
    let zero = vec![0.0; psi2.len()];
    let layer = velocity_of(dom, &ray_stream_gradient(dom, [&zero, &zero, &psi2], 0.0, width));
    Ok(solenoidal.axpy(1.0, &layer))
}

/// Discrete compatibility defects of an initial velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatibilityReport {
    /// `max |Tr(∇v₀A)|` over interior nodes.
    pub divergence: f64,
    /// `max |t(∇u₀ + ∇u₀ᵀ)n|` over the boundary, physical unit vectors.
    pub tangential: f64,
    /// `max |Tr(∇v₀A) − g(0)|` over all nodes.
    pub data: f64,
}

impl CompatibilityReport {
    pub fn max(&self) -> f64 {
        self.divergence.max(self.tangential).max(self.data)
    }
}

pub fn check_compatibility(dom: &DiscreteDomain, v0: &VectorField, g0: Option<&[f64]>) -> CompatibilityReport {
    let div = a_divergence(dom, v0);
    let divergence = (dom.grid().angles()..dom.len()).fold(0.0_f64, |m, i| m.max(div[i].abs()));
    let tangential = tangential_stress(dom, v0)
        .iter()
        .zip(dom.boundary())
        .fold(0.0_f64, |m, (s, b)| {
            let n = dom.stress_normal(b);
            m.max(s.abs() / (n[0] * n[0] + n[1] * n[1]))
        });
    let data = (0..dom.len()).fold(0.0_f64, |m, i| m.max((div[i] - g0.map_or(0.0, |g| g[i])).abs()));
    CompatibilityReport {
        divergence,
        tangential,
        data,
    }
}

/// Two physical boundary points, the directions the velocity should take
/// there, and the amplitude of the adjustment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplashAim {
    pub points: [PlanePoint; 2],
    pub directions: [Vec2; 2],
    pub amplitude: f64,
}

/// Outward unit normal of the physical boundary at each boundary node.
pub fn physical_normals(dom: &DiscreteDomain) -> Vec<Vec2> {
    let pts = physical_boundary(dom);
    let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
    let (dx, dy) = (derivative(&xs, TAU, 1), derivative(&ys, TAU, 1));
    dx.iter()
        .zip(&dy)
        .map(|(a, b)| {
            let s = a.hypot(*b);
            [b / s, -a / s]
        })
        .collect()
}

/// Index of the boundary node at `p`, if within half the local spacing.
fn boundary_node(dom: &DiscreteDomain, p: PlanePoint) -> Result<usize> {
    let pts = physical_boundary(dom);
    let nt = pts.len();
    let (j, d) = pts
        .iter()
        .enumerate()
        .map(|(j, q)| (j, q.dist(&p)))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let spacing = pts[(j + 1) % nt].dist(&pts[j]).max(pts[(j + nt - 1) % nt].dist(&pts[j]));
    if !(d <= 0.5 * spacing) {
        return Err(Error::PointsNotOnBoundary { x: p.x, y: p.y, distance: d });
    }
    Ok(j)
}

/// Odd bump `(s − c) exp(−(s − c)²/(2w²))` in periodic physical arclength,
/// with unit slope at its center.
fn odd_bump(s: f64, center: f64, width: f64, length: f64) -> f64 {
    let d = (s - center + 0.5 * length).rem_euclid(length) - 0.5 * length;
    d * (-d * d / (2.0 * width * width)).exp()
}

/// Adds to `ψ₀` two odd bumps of width 8 boundary cells so that the normal
/// velocity at the aimed points grows by `amplitude·(direction·n)`, then
/// rebuilds the velocity.
pub fn set_splash_velocity(dom: &DiscreteDomain, init: &InitialVelocity, aim: &SplashAim, width: Option<f64>) -> Result<InitialVelocity> {
    let idx = [boundary_node(dom, aim.points[0])?, boundary_node(dom, aim.points[1])?];
    if aim.amplitude == 0.0 {
        return Ok(init.clone());
    }
    let normals = physical_normals(dom);
    let st = &init.stream;
    let length = st.length(dom);
    let nt = st.psi0.len();
    let bump_width = 8.0 * length / nt as f64;
    let bumps: Vec<Vec<f64>> = idx
        .iter()
        .map(|&j| st.arclength.iter().map(|&s| odd_bump(s, st.arclength[j], bump_width, length)).collect())
        .collect();
    // slopes of the sampled bumps at the aimed nodes, in physical arclength
    let slopes: Vec<Vec<f64>> = bumps
        .iter()
        .map(|b| BoundaryStream::new(dom, b.clone()).map(|s| s.psi_s))
        .collect::<Result<_>>()?;
    let m = [[slopes[0][idx[0]], slopes[1][idx[0]]], [slopes[0][idx[1]], slopes[1][idx[1]]]];
    let rhs: Vec<f64> = (0..2)
        .map(|k| {
            let (d, n) = (aim.directions[k], normals[idx[k]]);
            aim.amplitude * (d[0] * n[0] + d[1] * n[1])
        })
        .collect();
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if !(det.abs() > 1e-12) {
        return Err(Error::IllPosed("aimed points are too close to be set independently".into()));
    }
    let beta = [(rhs[0] * m[1][1] - rhs[1] * m[0][1]) / det, (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det];
    let psi0: Vec<f64> = (0..nt).map(|j| st.psi0[j] + beta[0] * bumps[0][j] + beta[1] * bumps[1][j]).collect();
    build_stream(dom, BoundaryStream::new(dom, psi0)?, width)
}

/// `v·n` on the physical boundary.
pub fn normal_velocity(dom: &DiscreteDomain, v: &VectorField) -> Vec<f64> {
    physical_normals(dom)
        .iter()
        .zip(dom.boundary())
        .map(|(n, b)| {
            let u = v.at(b);
            u[0] * n[0] + u[1] * n[1]
        })
        .collect()
}
