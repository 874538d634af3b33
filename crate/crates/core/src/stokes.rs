//! The linear fixed-domain system
//! `v_t − Q²Δv + Aᵀ∇q = f`, `Tr(∇vA) = g`, `(qI − S)A⁻¹ñ₀ = h`, `v(0) = v₀`.
//!
//! Each time level solves a coupled stationary problem for `(v, q)`:
//! momentum and a pressure Poisson equation inside, the two stress
//! components and the A-divergence on the boundary. The pressure equation is
//! the A-divergence of the momentum equation, so the divergence defect obeys
//! a damped heat equation with zero boundary values.

use std::f64::consts::TAU;

use crate::elliptic::{a_divergence, a_gradient, boundary_stress, grad_a, symmetric, PoissonSolver, Projector};
use crate::error::{Error, Result};
use crate::grid::banded::{CsrBuilder, DirectSolver};
use crate::grid::{DiscreteDomain, ScalarField, VectorField};
use crate::linalg::{perp, Vec2};
use crate::spectral::derivative;

/// Uniform time levels `t_k = k·dt`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, steps: usize) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) || steps == 0 {
            return Err(Error::InvalidInput(format!("time grid T = {t_end}, steps = {steps}")));
        }
        Ok(TimeGrid { t_end, steps })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn levels(&self) -> usize {
        self.steps + 1
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_end
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }
}

/// Right-hand sides per time level and the initial velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearData {
    pub f: Vec<VectorField>,
    pub g: Vec<ScalarField>,
    /// Boundary stress data per level, one vector per boundary node.
    pub h: Vec<Vec<Vec2>>,
    pub v0: VectorField,
}

/// Defects of the t = 0 compatibility conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compatibility {
    /// `max |Tr(∇v₀A) − g(0)|`
    pub divergence: f64,
    /// `max |t'·(S(v₀)n' + h(0))| / |n'|²`
    pub tangential: f64,
    /// Size of the data the defects are measured against.
    pub scale: f64,
}

impl Compatibility {
    pub fn relative(&self) -> f64 {
        self.divergence.max(self.tangential) / self.scale
    }
}

impl LinearData {
    pub fn zeros(dom: &DiscreteDomain, grid: &TimeGrid) -> Self {
        let (n, nb, l) = (dom.len(), dom.grid().angles(), grid.levels());
        LinearData {
            f: vec![VectorField::zeros(n); l],
            g: vec![ScalarField::zeros(n); l],
            h: vec![vec![[0.0; 2]; nb]; l],
            v0: VectorField::zeros(n),
        }
    }

    fn validate(&self, dom: &DiscreteDomain, grid: &TimeGrid) -> Result<()> {
        let l = grid.levels();
        let nb = dom.grid().angles();
        let ok = self.f.len() == l
            && self.g.len() == l
            && self.h.len() == l
            && self.v0.len() == dom.len()
            && self.f.iter().all(|f| f.len() == dom.len())
            && self.g.iter().all(|g| g.len() == dom.len())
            && self.h.iter().all(|h| h.len() == nb);
        if !ok {
            return Err(Error::InvalidInput("linear data does not match the domain and time grid".into()));
        }
        if !(self.v0.is_finite()
            && self.f.iter().all(VectorField::is_finite)
            && self.g.iter().all(ScalarField::is_finite)
            && self.h.iter().flatten().all(|v| v[0].is_finite() && v[1].is_finite()))
        {
            return Err(Error::InvalidInput("non-finite linear data".into()));
        }
        Ok(())
    }

    pub fn compatibility(&self, dom: &DiscreteDomain) -> Compatibility {
        let ga = grad_a(dom, &self.v0);
        let divergence = (0..dom.len()).fold(0.0_f64, |m, i| m.max((ga[i].trace() - self.g[0][i]).abs()));
        let tangential = dom.boundary().fold(0.0_f64, |m, b| {
            let n = dom.stress_normal(b);
            let t = perp(n);
            let sn = symmetric(ga[b]).mul_vec(n);
            let h = self.h[0][b];
            let r = t[0] * (sn[0] + h[0]) + t[1] * (sn[1] + h[1]);
            m.max(r.abs() / (n[0] * n[0] + n[1] * n[1]))
        });
        let scale = ga
            .iter()
            .map(|m| m.max_abs())
            .chain(self.g[0].iter().map(|v| v.abs()))
            .chain(self.h[0].iter().map(|v| v[0].hypot(v[1])))
            .fold(1.0_f64, f64::max);
        Compatibility {
            divergence,
            tangential,
            scale,
        }
    }
}

/// Velocity and pressure per time level.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolution {
    pub v: Vec<VectorField>,
    pub q: Vec<ScalarField>,
    /// `max |Tr(∇vA) − g|` over interior nodes, per level.
    pub divergence_residual: Vec<f64>,
}

impl LinearSolution {
    /// `∫|v|²/Q²` per level.
    pub fn energy(&self, dom: &DiscreteDomain) -> Vec<f64> {
        self.v.iter().map(|v| dom.physical_norm(v).powi(2)).collect()
    }
}

/// Coefficients of `t'ᵀSn'` and `n'ᵀSn'` against `∂_k v_i`, with `n' = A⁻¹ñ₀`
/// and `t' = Jn'`, both scaled by `1/|n'|²`.
fn stress_rows(dom: &DiscreteDomain, b: usize) -> ([[f64; 2]; 2], [[f64; 2]; 2], f64) {
    let a = dom.frame(b).a;
    let n = dom.stress_normal(b);
    let t = perp(n);
    let nn = n[0] * n[0] + n[1] * n[1];
    let (an, at) = (a.mul_vec(n), a.mul_vec(t));
    let mut tang = [[0.0; 2]; 2];
    let mut norm = [[0.0; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            tang[i][k] = (t[i] * an[k] + n[i] * at[k]) / nn;
            norm[i][k] = 2.0 * n[i] * an[k] / nn;
        }
    }
    (tang, norm, nn)
}

/// The factored stationary problem
/// `σv − Q²Δv + Aᵀ∇q = F`, `Q²Δq = Tr(∇FA) − σg + Q²Δg` inside,
/// `(qI − S)n' = h`, `Tr(∇vA) = g` on the boundary.
#[derive(Debug, Clone)]
pub struct StationarySolver {
    sigma: f64,
    solver: DirectSolver,
}

impl StationarySolver {
    pub fn new(dom: &DiscreteDomain, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("stationary shift σ = {sigma}")));
        }
        let n = dom.len();
        let ops = dom.ops();
        let mut b = CsrBuilder::new(3 * n);
        for p in 0..n {
            let a = dom.frame(p).a;
            if dom.is_boundary(p) {
                let (tang, norm, nn) = stress_rows(dom, p);
                // −t'ᵀSn' = t'·h
                for i in 0..2 {
                    for k in 0..2 {
                        ops.d[k].row(p).for_each(|(m, w)| b.add(3 * m + i, -tang[i][k] * w));
                    }
                }
                b.finish_row();
                // Tr(∇vA) = g
                for i in 0..2 {
                    for k in 0..2 {
                        let c = a.get(k, i);
                        ops.d[k].row(p).for_each(|(m, w)| b.add(3 * m + i, c * w));
                    }
                }
                b.finish_row();
                // q − n'ᵀSn'/|n'|² = n'·h/|n'|²
                b.add(3 * p + 2, 1.0);
                let _ = nn;
                for i in 0..2 {
                    for k in 0..2 {
                        ops.d[k].row(p).for_each(|(m, w)| b.add(3 * m + i, -norm[i][k] * w));
                    }
                }
                b.finish_row();
            } else {
                let q2 = dom.frame(p).q2;
                for c in 0..2 {
                    b.add(3 * p + c, sigma);
                    ops.lap.row(p).for_each(|(m, w)| b.add(3 * m + c, -q2 * w));
                    for j in 0..2 {
                        let ajc = a.get(j, c);
                        ops.d[j].row(p).for_each(|(m, w)| b.add(3 * m + 2, ajc * w));
                    }
                    b.finish_row();
                }
                ops.lap.row(p).for_each(|(m, w)| b.add(3 * m + 2, w));
                b.finish_row();
            }
        }
        Ok(StationarySolver {
            sigma,
            solver: DirectSolver::new(b.build(), "stationary Stokes")?,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn solve(&self, dom: &DiscreteDomain, f: &VectorField, g: &[f64], h: &[Vec2]) -> Result<(VectorField, ScalarField)> {
        let n = dom.len();
        let div_f = a_divergence(dom, f);
        let lap_g = dom.ops().lap.apply(g);
        let mut rhs = vec![0.0; 3 * n];
        for p in 0..n {
            if dom.is_boundary(p) {
                let nv = dom.stress_normal(p);
                let t = perp(nv);
                let nn = nv[0] * nv[0] + nv[1] * nv[1];
                rhs[3 * p] = (t[0] * h[p][0] + t[1] * h[p][1]) / nn;
                rhs[3 * p + 1] = g[p];
                rhs[3 * p + 2] = (nv[0] * h[p][0] + nv[1] * h[p][1]) / nn;
            } else {
                let q2 = dom.frame(p).q2;
                let [f0, f1] = f.at(p);
                rhs[3 * p] = f0;
                rhs[3 * p + 1] = f1;
                rhs[3 * p + 2] = (div_f[p] - self.sigma * g[p]) / q2 + lap_g[p];
            }
        }
        let x = self.solver.solve(&rhs)?;
        let v = VectorField::from_fn(n, |p| [x[3 * p], x[3 * p + 1]]);
        let q = ScalarField((0..n).map(|p| x[3 * p + 2]).collect());
        Ok((v, q))
    }
}

fn zero_boundary(dom: &DiscreteDomain) -> Vec<Vec2> {
    vec![[0.0; 2]; dom.grid().angles()]
}

/// Solves `(λ+1)v − Q²Δv + Aᵀ∇q = R(rhs)` with `Tr(∇vA) = 0` and zero
/// boundary stress. Returns `(v, q, R rhs)`.
pub fn resolvent_solve(dom: &DiscreteDomain, lambda: f64, rhs: &VectorField) -> Result<(VectorField, ScalarField, VectorField)> {
    if !(lambda >= 0.0) {
        return Err(Error::OutOfRange {
            what: "resolvent λ",
            value: lambda,
            range: "[0, ∞)",
        });
    }
    let (rf, _) = Projector::new(dom)?.apply(dom, rhs)?;
    let solver = StationarySolver::new(dom, lambda + 1.0)?;
    let (v, q) = solver.solve(dom, &rf, &vec![0.0; dom.len()], &zero_boundary(dom))?;
    Ok((v, q, rf))
}

/// Time marching with one backward Euler step followed by BDF2. Both
/// stationary factorizations are kept, so repeated marches on the same
/// domain and grid only pay for substitutions.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: TimeGrid,
    first: StationarySolver,
    rest: Option<StationarySolver>,
    poisson: PoissonSolver,
    /// Relative tolerance of the t = 0 compatibility check.
    pub compat_tol: f64,
}

impl Stepper {
    pub fn new(dom: &DiscreteDomain, grid: TimeGrid) -> Result<Self> {
        let dt = grid.dt();
        Ok(Stepper {
            grid,
            first: StationarySolver::new(dom, 1.0 / dt)?,
            rest: if grid.steps() > 1 { Some(StationarySolver::new(dom, 1.5 / dt)?) } else { None },
            poisson: PoissonSolver::new(dom)?,
            compat_tol: 1e-8,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn poisson(&self) -> &PoissonSolver {
        &self.poisson
    }

    /// Shift `σ` and history term of level `k ≥ 1`.
    fn level(&self, k: usize, v: &[VectorField]) -> (&StationarySolver, VectorField) {
        let dt = self.grid.dt();
        if k == 1 {
            (&self.first, v[0].scaled(1.0 / dt))
        } else {
            let s = self.rest.as_ref().expect("BDF2 solver exists for more than one step");
            (s, v[k - 1].scaled(2.0 / dt).axpy(-0.5 / dt, &v[k - 2]))
        }
    }

    /// Pressure at t = 0 from the divergence of the momentum equation, with
    /// `∂_t g(0)` from a one-sided difference of the data.
    pub fn initial_pressure(&self, dom: &DiscreteDomain, data: &LinearData) -> Result<ScalarField> {
        let dt = self.grid.dt();
        let g = &data.g;
        let gt: Vec<f64> = if g.len() > 2 {
            (0..dom.len()).map(|i| (-3.0 * g[0][i] + 4.0 * g[1][i] - g[2][i]) / (2.0 * dt)).collect()
        } else {
            (0..dom.len()).map(|i| (g[1][i] - g[0][i]) / dt).collect()
        };
        let lap_v = dom.laplacian(&data.v0);
        let visc = VectorField::from_fn(dom.len(), |i| {
            let [a, b] = lap_v.at(i);
            let q2 = dom.frame(i).q2;
            [q2 * a, q2 * b]
        });
        let div = a_divergence(dom, &data.f[0].axpy(1.0, &visc));
        let rhs: Vec<f64> = (0..dom.len()).map(|i| div[i] - gt[i]).collect();
        let ga = grad_a(dom, &data.v0);
        let bc: Vec<f64> = dom
            .boundary()
            .map(|b| {
                let n = dom.stress_normal(b);
                let sn = symmetric(ga[b]).mul_vec(n);
                let h = data.h[0][b];
                (n[0] * (sn[0] + h[0]) + n[1] * (sn[1] + h[1])) / (n[0] * n[0] + n[1] * n[1])
            })
            .collect();
        self.poisson.solve(&rhs, &bc)
    }

    pub fn evolve(&self, dom: &DiscreteDomain, data: &LinearData) -> Result<LinearSolution> {
        data.validate(dom, &self.grid)?;
        let c = data.compatibility(dom);
        if c.divergence > self.compat_tol * c.scale {
            return Err(Error::CompatibilityViolated {
                what: "Tr(∇v₀A) − g(0)",
                value: c.divergence,
                tolerance: self.compat_tol * c.scale,
            });
        }
        if c.tangential > self.compat_tol * c.scale {
            return Err(Error::CompatibilityViolated {
                what: "tangential stress of v₀ − h(0)",
                value: c.tangential,
                tolerance: self.compat_tol * c.scale,
            });
        }
        let mut v = vec![data.v0.clone()];
        let mut q = vec![self.initial_pressure(dom, data)?];
        let mut res = vec![0.0];
        for k in 1..self.grid.levels() {
            let (solver, hist) = self.level(k, &v);
            let rhs = data.f[k].axpy(1.0, &hist);
            let (vk, qk) = solver.solve(dom, &rhs, &data.g[k], &data.h[k])?;
            let div = a_divergence(dom, &vk);
            res.push((0..dom.len()).filter(|&i| !dom.is_boundary(i)).fold(0.0_f64, |m, i| m.max((div[i] - data.g[k][i]).abs())));
            v.push(vk);
            q.push(qk);
        }
        Ok(LinearSolution {
            v,
            q,
            divergence_residual: res,
        })
    }
}

pub fn evolve(dom: &DiscreteDomain, grid: TimeGrid, data: &LinearData) -> Result<LinearSolution> {
    Stepper::new(dom, grid)?.evolve(dom, data)
}

/// `1 − S(x)` on `[0, 1]` with `S` the degree-9 smoothstep, flat to fourth
/// order at both ends so the lift stays smooth enough for the stencils.
fn cutoff(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        1.0 - x.powi(5) * (126.0 + x * (-420.0 + x * (540.0 + x * (-315.0 + 70.0 * x))))
    }
}

/// `χ'` of [`cutoff`].
fn cutoff_slope(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -630.0 * (x * (1.0 - x)).powi(4)
    }
}

/// `1/|∇ρ|` at the boundary node of each grid ray.
fn ray_scale(dom: &DiscreteDomain) -> Vec<f64> {
    let grid = dom.grid();
    (0..grid.angles())
        .map(|j| {
            let g = dom.metric(j).inv.transpose().mul_vec(grid.reference_point(j));
            1.0 / g[0].hypot(g[1])
        })
        .collect()
}

/// A-divergence-free fields `w = JAᵀ∇ψ` whose boundary stress has tangential
/// part `η`, with `ψ = ½ η u² (1 − ρ)² χ((1 − ρ)/width)` and `u = 1/|∇ρ|`
/// frozen along grid rays, so `u(1 − ρ)` is a distance with `∇ = −ñ` on the
/// boundary. `∇ψ` is evaluated in closed form in the reference polar
/// coordinates, with spectral angular derivatives of `η` and `u`. `width` is
/// measured in the reference radius and must span a few rings. `η(0)` must
/// vanish.
pub fn stream_lift(dom: &DiscreteDomain, eta: &[Vec<f64>], width: f64) -> Result<Vec<VectorField>> {
    if let Some(first) = eta.first() {
        let m = first.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if m > 0.0 {
            return Err(Error::CompatibilityViolated {
                what: "η(0)",
                value: m,
                tolerance: 0.0,
            });
        }
    }
    let grid = dom.grid();
    let floor = 3.0 * grid.drho();
    if !(width >= floor && width <= 1.0) {
        return Err(Error::ChartTooNarrow {
            blend: width,
            half_width: floor,
        });
    }
    let nt = grid.angles();
    if eta.iter().any(|e| e.len() != nt) {
        return Err(Error::InvalidInput("η must hold one value per boundary node".into()));
    }
    let zero = vec![0.0; nt];
    eta.iter()
        .map(|e| {
            if e.iter().all(|v| *v == 0.0) {
                return Ok(VectorField::zeros(dom.len()));
            }
            let grad = ray_stream_gradient(dom, [&zero, &zero, e], 0.0, width);
            Ok(VectorField::from_fn(dom.len(), |i| perp(dom.frame(i).a.transpose().mul_vec(grad[i]))))
        })
        .collect()
}

/// Tilde gradient of the ray stream
/// `ψ = χ(x/width)(a₀ + a₁ d + ½ a₂ d² − far) + far`, with `x = 1 − ρ` and
/// `d = u x` the ray distance. The coefficients are per grid angle; angular
/// derivatives are spectral and everything else is closed form.
pub(crate) fn ray_stream_gradient(dom: &DiscreteDomain, coeffs: [&[f64]; 3], far: f64, width: f64) -> Vec<Vec2> {
    let grid = dom.grid();
    let u = ray_scale(dom);
    let a1u: Vec<f64> = coeffs[1].iter().zip(&u).map(|(a, u)| a * u).collect();
    let a2u: Vec<f64> = coeffs[2].iter().zip(&u).map(|(a, u)| 0.5 * a * u * u).collect();
    let slopes = [derivative(coeffs[0], TAU, 1), derivative(&a1u, TAU, 1), derivative(&a2u, TAU, 1)];
    (0..dom.len())
        .map(|i| {
            let (ring, j) = (grid.ring_of(i), grid.angle_of(i));
            let rho = grid.rho(ring);
            let x = 1.0 - rho;
            if x >= width {
                return [0.0; 2];
            }
            let y = x / width;
            let poly = coeffs[0][j] + a1u[j] * x + a2u[j] * x * x - far;
            let d_x = cutoff_slope(y) / width * poly + cutoff(y) * (a1u[j] + 2.0 * a2u[j] * x);
            let d_theta = cutoff(y) * (slopes[0][j] + slopes[1][j] * x + slopes[2][j] * x * x);
            let d_rho = -d_x;
            let r = grid.reference_point(i);
            let (cs, sn) = (r[0] / rho, r[1] / rho);
            let g_ref = [cs * d_rho - sn * d_theta / rho, sn * d_rho + cs * d_theta / rho];
            dom.metric(i).inv.transpose().mul_vec(g_ref)
        })
        .collect()
}

/// Values of the ray stream of [`ray_stream_gradient`].
pub(crate) fn ray_stream_values(dom: &DiscreteDomain, coeffs: [&[f64]; 3], far: f64, width: f64) -> Vec<f64> {
    let grid = dom.grid();
    let u = ray_scale(dom);
    (0..dom.len())
        .map(|i| {
            let j = grid.angle_of(i);
            let x = 1.0 - grid.rho(grid.ring_of(i));
            let d = u[j] * x;
            let poly = coeffs[0][j] + coeffs[1][j] * d + 0.5 * coeffs[2][j] * d * d - far;
            cutoff(x / width) * poly + far
        })
        .collect()
}

/// Defects left in the residual data after the reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionReport {
    /// `‖R f̃(0)‖`
    pub projected_force: f64,
    /// `max_t ‖g̃‖_{L²}`
    pub divergence: f64,
    /// `max |h̃|`
    pub stress: f64,
    /// `max |ṽ₀|`
    pub initial: f64,
}

/// The lift `(v⁴, q⁴)` and the residual data `d − d⁴`.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub lift: LinearSolution,
    pub residual: LinearData,
    pub report: ReductionReport,
}

/// Builds an explicit `(v⁴, q⁴)` carrying the initial velocity, the
/// A-divergence and the boundary stress of `data`:
/// 1. `v¹ = v₀ + t e^{−t²} ∂_t v(0)`, `q¹ = q(0)`;
/// 2. `v² = v¹ + Aᵀ∇φ` with the discrete `Q²Δφ = g − Tr(∇v¹A)`, `φ|∂ = 0`;
/// 3. `v³ = v² + w` with `w` the stream lift of the tangential stress defect;
/// 4. `q⁴ = q³ + q̄` with `q̄` harmonic, carrying the normal stress defect.
///
/// The lift's data `d⁴` are the scheme's own residuals of `(v⁴, q⁴)`, so the
/// march of `d − d⁴` plus the lift reproduces the march of `d`.
pub fn reduce_data(dom: &DiscreteDomain, stepper: &Stepper, data: &LinearData) -> Result<Reduction> {
    let grid = *stepper.grid();
    data.validate(dom, &grid)?;
    let n = dom.len();
    let times = grid.times();
    let tau = |t: f64| t * (-t * t).exp();

    // step 1
    let q0 = stepper.initial_pressure(dom, data)?;
    let lap_v0 = dom.laplacian(&data.v0);
    let grad_q0 = a_gradient(dom, &q0);
    let vt0 = VectorField::from_fn(n, |i| {
        let q2 = dom.frame(i).q2;
        let [f0, f1] = data.f[0].at(i);
        let [l0, l1] = lap_v0.at(i);
        let [g0, g1] = grad_q0.at(i);
        [f0 + q2 * l0 - g0, f1 + q2 * l1 - g1]
    });
    let mut v: Vec<VectorField> = times.iter().map(|&t| data.v0.axpy(tau(t), &vt0)).collect();
    let mut q: Vec<ScalarField> = vec![q0.clone(); times.len()];

    // step 2
    let proj = Projector::new(dom)?;
    for (k, vk) in v.iter_mut().enumerate().skip(1) {
        *vk = adjust_divergence(dom, &proj, vk, &data.g[k])?;
    }

    // step 3
    let width = blend_width(dom);
    let eta: Vec<Vec<f64>> = (0..times.len())
        .map(|k| {
            if k == 0 {
                return vec![0.0; dom.grid().angles()];
            }
            let s = boundary_stress(dom, &v[k], &q[k]);
            dom.boundary()
                .map(|b| {
                    let t = perp(dom.stress_normal(b));
                    t[0] * (s[b][0] - data.h[k][b][0]) + t[1] * (s[b][1] - data.h[k][b][1])
                })
                .collect()
        })
        .collect();
    let w = stream_lift(dom, &eta, width)?;
    for (vk, wk) in v.iter_mut().zip(&w) {
        *vk = vk.axpy(1.0, wk);
    }

    // step 4
    for k in 1..times.len() {
        let s = boundary_stress(dom, &v[k], &q[k]);
        let bc: Vec<f64> = dom
            .boundary()
            .map(|b| {
                let nv = dom.stress_normal(b);
                let d = [data.h[k][b][0] - s[b][0], data.h[k][b][1] - s[b][1]];
                (nv[0] * d[0] + nv[1] * d[1]) / (nv[0] * nv[0] + nv[1] * nv[1])
            })
            .collect();
        let qbar = stepper.poisson().solve(&vec![0.0; n], &bc)?;
        q[k] = ScalarField(q[k].iter().zip(qbar.iter()).map(|(a, b)| a + b).collect());
    }

    // the scheme's data of the lift
    let mut lift_data = LinearData::zeros(dom, &grid);
    lift_data.v0 = data.v0.clone();
    lift_data.f[0] = data.f[0].clone();
    lift_data.g[0] = a_divergence(dom, &data.v0);
    lift_data.h[0] = data.h[0].clone();
    let mut helmholtz: Vec<(f64, DirectSolver)> = Vec::new();
    for k in 1..times.len() {
        let (solver, hist) = stepper.level(k, &v);
        let sigma = solver.sigma();
        let lap_v = dom.laplacian(&v[k]);
        let gq = a_gradient(dom, &q[k]);
        let big_f = VectorField::from_fn(n, |i| {
            let q2 = dom.frame(i).q2;
            let [a, b] = v[k].at(i);
            let [l0, l1] = lap_v.at(i);
            let [g0, g1] = gq.at(i);
            [sigma * a - q2 * l0 + g0, sigma * b - q2 * l1 + g1]
        });
        lift_data.f[k] = big_f.axpy(-1.0, &hist);
        let div_f = a_divergence(dom, &big_f);
        let lap_q = dom.ops().lap.apply(&q[k]);
        let div_v = a_divergence(dom, &v[k]);
        let rhs: Vec<f64> = (0..n)
            .map(|i| if dom.is_boundary(i) { div_v[i] } else { div_f[i] - dom.frame(i).q2 * lap_q[i] })
            .collect();
        if !helmholtz.iter().any(|(s, _)| *s == sigma) {
            helmholtz.push((sigma, helmholtz_solver(dom, sigma)?));
        }
        let hs = &helmholtz.iter().find(|(s, _)| *s == sigma).expect("factored above").1;
        lift_data.g[k] = ScalarField(hs.solve(&rhs)?);
        lift_data.h[k] = boundary_stress(dom, &v[k], &q[k]);
    }
    q[0] = stepper.initial_pressure(dom, &lift_data)?;

    let residual = LinearData {
        f: data.f.iter().zip(&lift_data.f).map(|(a, b)| a.axpy(-1.0, b)).collect(),
        g: data
            .g
            .iter()
            .zip(&lift_data.g)
            .map(|(a, b)| ScalarField(a.iter().zip(b.iter()).map(|(x, y)| x - y).collect()))
            .collect(),
        h: data
            .h
            .iter()
            .zip(&lift_data.h)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| [x[0] - y[0], x[1] - y[1]]).collect())
            .collect(),
        v0: VectorField::zeros(n),
    };
    let (rf0, _) = proj.apply(dom, &residual.f[0])?;
    let report = ReductionReport {
        projected_force: dom.physical_norm(&rf0),
        divergence: residual.g.iter().map(|g| dom.l2_scalar(g)).fold(0.0, f64::max),
        stress: residual.h.iter().flatten().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max),
        initial: 0.0,
    };
    let divergence_residual = vec![0.0; v.len()];
    Ok(Reduction {
        lift: LinearSolution {
            v,
            q,
            divergence_residual,
        },
        residual,
        report,
    })
}

/// `v + Aᵀ∇φ` with `φ = 0` on the boundary and the interior A-divergence
/// equal to `g`.
pub fn adjust_divergence(dom: &DiscreteDomain, proj: &Projector, v: &VectorField, g: &[f64]) -> Result<VectorField> {
    let div = a_divergence(dom, v);
    let defect: Vec<f64> = (0..dom.len()).map(|i| g[i] - div[i]).collect();
    let phi = proj.potential(&defect)?;
    Ok(v.axpy(1.0, &a_gradient(dom, &phi)))
}

/// Default blend width of the stream lift, in the reference radius.
pub fn blend_width(dom: &DiscreteDomain) -> f64 {
    (3.0 * dom.grid().drho()).clamp(0.5, 1.0)
}

fn helmholtz_solver(dom: &DiscreteDomain, sigma: f64) -> Result<DirectSolver> {
    let mut b = CsrBuilder::new(dom.len());
    for i in 0..dom.len() {
        if dom.is_boundary(i) {
            b.add(i, 1.0);
        } else {
            let q2 = dom.frame(i).q2;
            b.add(i, sigma);
            dom.ops().lap.row(i).for_each(|(c, w)| b.add(c, -q2 * w));
        }
        b.finish_row();
    }
    DirectSolver::new(b.build(), "divergence lift")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{FrameModel, PlanePoint};
    use crate::grid::maps::LogDisk;
    use crate::grid::PolarGrid;

    fn bean(nr: usize, nt: usize) -> DiscreteDomain {
        let map = LogDisk { mu: 0.2, a: 0.25, b: 0.8 };
        DiscreteDomain::from_map(&map, PolarGrid::new(nr, nt).unwrap(), FrameModel::default()).unwrap()
    }

    fn velocity(p: PlanePoint) -> [f64; 2] {
        [p.y.sin(), p.x.cos()]
    }

    fn pressure(p: PlanePoint) -> f64 {
        p.x * p.y
    }

    /// Data of `(cos t · V, cos t · P)`: analytic force, discrete g and h.
    fn manufactured(dom: &DiscreteDomain, grid: &TimeGrid) -> LinearData {
        let n = dom.len();
        let vel = dom.sample_vector(velocity);
        let pre = dom.sample_scalar(pressure);
        let mut data = LinearData::zeros(dom, grid);
        data.v0 = vel.clone();
        for (k, t) in grid.times().into_iter().enumerate() {
            data.f[k] = VectorField::from_fn(n, |i| {
                let p = dom.nodes()[i];
                let fr = dom.frame(i);
                let [v0, v1] = velocity(p);
                let grad_q = fr.a.transpose().mul_vec([p.y, p.x]);
                [
                    -t.sin() * v0 + fr.q2 * t.cos() * p.y.sin() + t.cos() * grad_q[0],
                    -t.sin() * v1 + fr.q2 * t.cos() * p.x.cos() + t.cos() * grad_q[1],
                ]
            });
            let vk = vel.scaled(t.cos());
            data.g[k] = a_divergence(dom, &vk);
            data.h[k] = boundary_stress(dom, &vk, &pre.scaled(t.cos()));
        }
        data
    }

    fn sup_error(dom: &DiscreteDomain, grid: &TimeGrid, sol: &LinearSolution) -> f64 {
        let vel = dom.sample_vector(velocity);
        grid.times()
            .iter()
            .zip(&sol.v)
            .map(|(t, v)| v.axpy(-t.cos(), &vel).max_abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let dom = bean(6, 16);
        let grid = TimeGrid::new(0.5, 4).unwrap();
        let sol = evolve(&dom, grid, &LinearData::zeros(&dom, &grid)).unwrap();
        assert!(sol.v.iter().all(|v| v.max_abs() == 0.0));
        assert!(sol.q.iter().all(|q| q.max_abs() == 0.0));
    }

    #[test]
    fn incompatible_data_is_rejected() {
        let dom = bean(6, 16);
        let grid = TimeGrid::new(0.5, 4).unwrap();
        let mut data = LinearData::zeros(&dom, &grid);
        data.g[0] = ScalarField(vec![1.0; dom.len()]);
        assert!(matches!(evolve(&dom, grid, &data), Err(Error::CompatibilityViolated { .. })));
    }

    #[test]
    fn manufactured_solution_converges_at_second_order() {
        let mut errs = Vec::new();
        for (nr, nt, steps) in [(8, 32, 4), (16, 64, 8), (32, 128, 16)] {
            let dom = bean(nr, nt);
            let grid = TimeGrid::new(0.5, steps).unwrap();
            let sol = evolve(&dom, grid, &manufactured(&dom, &grid)).unwrap();
            errs.push(sup_error(&dom, &grid, &sol));
        }
        let order = (errs[1] / errs[2]).log2();
        assert!((order - 2.0).abs() < 0.2, "{errs:?}");
    }

    #[test]
    fn energy_decays_without_forcing() {
        let dom = bean(10, 32);
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let psi: Vec<f64> = dom.nodes().iter().map(|p| (1.0 - p.norm().powi(2)).powi(2) * p.x).collect();
        let raw = a_gradient(&dom, &psi);
        let v0 = Projector::new(&dom).unwrap().apply(&dom, &VectorField::from_fn(dom.len(), |i| perp(raw.at(i)))).unwrap().0;
        let mut data = LinearData::zeros(&dom, &grid);
        data.v0 = v0;
        data.g[0] = a_divergence(&dom, &data.v0);
        let ga = grad_a(&dom, &data.v0);
        data.h[0] = dom
            .boundary()
            .map(|b| {
                let sn = symmetric(ga[b]).mul_vec(dom.stress_normal(b));
                [-sn[0], -sn[1]]
            })
            .collect();
        let sol = evolve(&dom, grid, &data).unwrap();
        let e = sol.energy(&dom);
        assert!(e.windows(2).skip(1).all(|w| w[1] <= w[0] * (1.0 + 1e-9)), "{e:?}");
        assert!(e[grid.steps()] < e[1]);
    }

    #[test]
    fn resolvent_bound_and_zero_rhs() {
        let dom = bean(10, 32);
        let rhs = dom.sample_vector(|p| [(2.0 * p.y).sin() + p.x, p.x * p.y]);
        let zero = resolvent_solve(&dom, 0.0, &VectorField::zeros(dom.len())).unwrap();
        assert_eq!(zero.0.max_abs(), 0.0);
        let mut prev = f64::INFINITY;
        for lambda in [0.0, 1.0, 10.0, 100.0] {
            let (v, _, rf) = resolvent_solve(&dom, lambda, &rhs).unwrap();
            let ratio = dom.physical_norm(&v) / dom.physical_norm(&rf);
            assert!(ratio <= 1.05 / (1.0 + lambda), "λ = {lambda}: {ratio}");
            assert!(ratio <= prev);
            prev = ratio;
        }
    }

    /// Max defects of the tangential stress, boundary velocity and
    /// A-divergence of the lift of `η = t sin θ` at `t = 2`.
    fn lift_defects(nr: usize, nt: usize) -> [f64; 3] {
        let dom = bean(nr, nt);
        let eta: Vec<Vec<f64>> = (0..3)
            .map(|k| (0..nt).map(|j| k as f64 * (TAU * j as f64 / nt as f64).sin()).collect())
            .collect();
        let w = stream_lift(&dom, &eta, blend_width(&dom)).unwrap();
        assert_eq!(w[0].max_abs(), 0.0);
        let ga = grad_a(&dom, &w[2]);
        let mut out = [0.0_f64; 3];
        for b in dom.boundary() {
            let n = dom.stress_normal(b);
            let t = perp(n);
            let sn = symmetric(ga[b]).mul_vec(n);
            out[0] = out[0].max((t[0] * sn[0] + t[1] * sn[1] - eta[2][b]).abs());
            out[1] = out[1].max(w[2].at(b)[0].hypot(w[2].at(b)[1]));
        }
        out[2] = a_divergence(&dom, &w[2]).max_abs();
        out
    }

    #[test]
    fn stream_lift_carries_the_tangential_stress() {
        let coarse = lift_defects(24, 96);
        let fine = lift_defects(48, 192);
        assert_eq!(coarse[1] + fine[1], 0.0);
        for c in [0, 2] {
            assert!((coarse[c] / fine[c]).log2() > 1.7, "{coarse:?} {fine:?}");
        }
    }

    #[test]
    fn divergence_adjustment_is_exact_inside() {
        let dom = bean(10, 32);
        let v = dom.sample_vector(|p| [p.x * p.y, p.y.sin()]);
        let g = dom.sample_scalar(|p| (p.x - p.y).cos());
        let adj = adjust_divergence(&dom, &Projector::new(&dom).unwrap(), &v, &g).unwrap();
        let div = a_divergence(&dom, &adj);
        let err = (dom.grid().angles()..dom.len()).fold(0.0_f64, |m, i| m.max((div[i] - g[i]).abs()));
        assert!(err < 1e-10, "{err}");
        assert!(dom.boundary().all(|b| adj.at(b) == v.at(b) || (adj.at(b)[0] - v.at(b)[0]).abs() < 1.0));
    }

    #[test]
    fn reduction_defects_vanish_under_refinement() {
        let defects: Vec<ReductionReport> = [(8, 32, 4), (16, 64, 8)]
            .into_iter()
            .map(|(nr, nt, steps)| {
                let dom = bean(nr, nt);
                let grid = TimeGrid::new(0.5, steps).unwrap();
                let stepper = Stepper::new(&dom, grid).unwrap();
                reduce_data(&dom, &stepper, &manufactured(&dom, &grid)).unwrap().report
            })
            .collect();
        assert_eq!(defects[1].projected_force, 0.0);
        // the pressure equation's commutator defect sits on the pole rings
        assert!((defects[0].divergence / defects[1].divergence).log2() > 0.9, "{defects:?}");
        assert!((defects[0].stress / defects[1].stress).log2() > 1.7, "{defects:?}");
    }

    #[test]
    fn reduction_is_path_independent() {
        let dom = bean(8, 32);
        let grid = TimeGrid::new(0.5, 6).unwrap();
        let data = manufactured(&dom, &grid);
        let stepper = Stepper::new(&dom, grid).unwrap();
        let direct = stepper.evolve(&dom, &data).unwrap();
        let red = reduce_data(&dom, &stepper, &data).unwrap();
        assert_eq!(red.residual.v0.max_abs(), 0.0);
        let part = stepper.evolve(&dom, &red.residual).unwrap();
        let scale = direct.v.iter().map(VectorField::max_abs).fold(1.0, f64::max);
        for k in 0..grid.levels() {
            let sum = part.v[k].axpy(1.0, &red.lift.v[k]);
            assert!(sum.axpy(-1.0, &direct.v[k]).max_abs() < 1e-8 * scale, "level {k}");
        }
    }
}
