//! Picard iteration for the moving-frame system on the fixed tilde domain.
//!
//! The unknowns are `w = v − φ`, its pressure `q_w = q − q_φ` and the flow
//! map `X`, stored as the displacement `Y = X − α`. Each iteration assembles
//! the frame-difference data `(f̃, g̃, h̃)` from the previous iterate, adds the
//! corrector terms, marches the linear problem from rest and integrates the
//! new flow map with the trapezoid rule.

use std::time::Instant;

use crate::conformal::{ConformalFrame, PlanePoint};
use crate::elliptic::{a_gradient, corrector_pressure, grad_a, symmetric, PoissonSolver};
use crate::error::{Error, Result};
use crate::grid::{DiscreteDomain, ScalarField, VectorField};
use crate::linalg::{Mat2, Vec2};
use crate::norms::{parabolic_norm, pressure_norm, DiskExtension, NormKind, NormSpec};
use crate::stokes::{LinearData, Stepper, TimeGrid};

/// Largest admissible condition number of `∇X`.
pub const MAX_CONDITION: f64 = 1e8;

/// The flow map as a displacement per time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    pub displacement: Vec<VectorField>,
}

impl FlowMap {
    pub fn identity(dom: &DiscreteDomain, grid: &TimeGrid) -> Self {
        FlowMap {
            displacement: vec![VectorField::zeros(dom.len()); grid.levels()],
        }
    }

    /// The map that stays at `α + y₀` for all times.
    pub fn frozen(y0: VectorField, grid: &TimeGrid) -> Self {
        FlowMap {
            displacement: vec![y0; grid.levels()],
        }
    }

    pub fn levels(&self) -> usize {
        self.displacement.len()
    }

    pub fn position(&self, dom: &DiscreteDomain, k: usize, i: usize) -> PlanePoint {
        let p = dom.nodes()[i];
        let [a, b] = self.displacement[k].at(i);
        PlanePoint::new(p.x + a, p.y + b)
    }

    /// `∇X = I + ∇Y` per node.
    pub fn deformation(&self, dom: &DiscreteDomain, k: usize) -> Vec<Mat2> {
        dom.gradient(&self.displacement[k])
            .into_iter()
            .map(|g| Mat2::IDENTITY + g)
            .collect()
    }

    /// `ζ = (∇X)⁻¹` per node, rejecting folded or degenerate maps.
    pub fn inverse_deformation(&self, dom: &DiscreteDomain, k: usize) -> Result<Vec<Mat2>> {
        self.deformation(dom, k)
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                let det = f.det();
                if !(det > 0.0) {
                    return Err(Error::FoldingDetected { node: i, step: k, det });
                }
                let cond = f.condition();
                if cond > MAX_CONDITION {
                    return Err(Error::ResolutionLost(format!(
                        "∇X has condition {cond:e} at node {i}, time index {k}"
                    )));
                }
                Ok(f.inverse().expect("positive determinant"))
            })
            .collect()
    }

    /// `A∘X` per node, in closed form at the moved points.
    pub fn frames(&self, dom: &DiscreteDomain, k: usize) -> Result<Vec<ConformalFrame>> {
        let model = dom.frame_model();
        let shift = model.shift();
        (0..dom.len())
            .map(|i| {
                if self.displacement[k].at(i) == [0.0, 0.0] {
                    return Ok(*dom.frame(i));
                }
                let p = self.position(dom, k, i);
                model.frame(PlanePoint::new(p.x + shift[0], p.y + shift[1]))
            })
            .collect()
    }

    /// The moved boundary normal `(A∘X)⁻¹ ∇_J X ñ₀` with `∇_J X = −J∇XJ`.
    pub fn moved_normals(&self, dom: &DiscreteDomain, k: usize, frames: &[ConformalFrame]) -> Vec<Vec2> {
        let def = self.deformation(dom, k);
        dom.boundary()
            .map(|b| {
                let gj = -(Mat2::J * def[b] * Mat2::J);
                frames[b].a_inv.mul_vec(gj.mul_vec(dom.normal(b)))
            })
            .collect()
    }
}

fn tau(t: f64) -> f64 {
    t * (-t * t).exp()
}

fn tau_rate(t: f64) -> f64 {
    (1.0 - 2.0 * t * t) * (-t * t).exp()
}

fn scaled_q2(dom: &DiscreteDomain, v: &VectorField) -> VectorField {
    VectorField::from_fn(dom.len(), |i| {
        let [a, b] = v.at(i);
        let q2 = dom.frame(i).q2;
        [q2 * a, q2 * b]
    })
}

/// `φ = v₀ + τ(t)D` with `τ = t e^{−t²}` and `D = Q²Δv₀ − Aᵀ∇q_φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Corrector {
    pub v0: VectorField,
    pub q_phi: ScalarField,
    /// `D`
    pub drift: VectorField,
    /// `Q²ΔD`
    drift_viscous: VectorField,
    /// `∇(Av₀)`
    flow_gradient: Vec<Mat2>,
    /// `∂_kA (Av₀)_k`
    frame_rate: Vec<Mat2>,
}

pub fn build_corrector(dom: &DiscreteDomain, v0: &VectorField) -> Result<Corrector> {
    Corrector::with_solver(dom, &PoissonSolver::new(dom)?, v0)
}

impl Corrector {
    pub fn with_solver(dom: &DiscreteDomain, poisson: &PoissonSolver, v0: &VectorField) -> Result<Self> {
        let q_phi = corrector_pressure(dom, poisson, v0)?;
        let drift = scaled_q2(dom, &dom.laplacian(v0)).axpy(-1.0, &a_gradient(dom, &q_phi));
        let drift_viscous = scaled_q2(dom, &dom.laplacian(&drift));
        let av0 = VectorField::from_fn(dom.len(), |i| dom.frame(i).a.mul_vec(v0.at(i)));
        let flow_gradient = dom.gradient(&av0);
        let frame_rate = (0..dom.len())
            .map(|i| {
                let j = dom.frame_jet(i);
                let [c0, c1] = av0.at(i);
                j.dx.scale(c0) + j.dy.scale(c1)
            })
            .collect();
        Ok(Corrector {
            v0: v0.clone(),
            q_phi,
            drift,
            drift_viscous,
            flow_gradient,
            frame_rate,
        })
    }

    pub fn phi(&self, t: f64) -> VectorField {
        self.v0.axpy(tau(t), &self.drift)
    }

    pub fn phi_rate(&self, t: f64) -> VectorField {
        self.drift.scaled(tau_rate(t))
    }

    /// `ζ_φ = I − τ∇(Av₀)`
    pub fn zeta(&self, t: f64) -> Vec<Mat2> {
        let s = tau(t);
        self.flow_gradient.iter().map(|g| Mat2::IDENTITY - g.scale(s)).collect()
    }

    /// `A_φ = A + τ ∂_kA (Av₀)_k`
    pub fn frame(&self, dom: &DiscreteDomain, t: f64) -> Vec<Mat2> {
        let s = tau(t);
        (0..dom.len()).map(|i| dom.frame(i).a + self.frame_rate[i].scale(s)).collect()
    }

    /// `−∂_tφ + Q²Δφ − Aᵀ∇q_φ = D(1 − τ') + τQ²ΔD`
    pub fn forcing(&self, t: f64) -> VectorField {
        self.drift.scaled(1.0 - tau_rate(t)).axpy(tau(t), &self.drift_viscous)
    }

    /// `−Tr(∇φA)`
    pub fn divergence_datum(&self, dom: &DiscreteDomain, t: f64) -> ScalarField {
        ScalarField(grad_a(dom, &self.phi(t)).iter().map(|m| -m.trace()).collect())
    }

    /// `−q_φ n' + S(φ)n'`
    pub fn stress_datum(&self, dom: &DiscreteDomain, t: f64) -> Vec<Vec2> {
        let ga = grad_a(dom, &self.phi(t));
        dom.boundary()
            .map(|b| {
                let n = dom.stress_normal(b);
                let sn = symmetric(ga[b]).mul_vec(n);
                let q = self.q_phi[b];
                [sn[0] - q * n[0], sn[1] - q * n[1]]
            })
            .collect()
    }
}

/// One Picard iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
    pub n: usize,
    pub w: Vec<VectorField>,
    pub q_w: Vec<ScalarField>,
    pub flow: FlowMap,
}

impl IterationState {
    /// `w = 0`, `q_w = 0`, `X = α + y₀`.
    pub fn seed(dom: &DiscreteDomain, grid: &TimeGrid, y0: Option<&VectorField>) -> Self {
        let l = grid.levels();
        IterationState {
            n: 0,
            w: vec![VectorField::zeros(dom.len()); l],
            q_w: vec![ScalarField::zeros(dom.len()); l],
            flow: match y0 {
                Some(y) => FlowMap::frozen(y.clone(), grid),
                None => FlowMap::identity(dom, grid),
            },
        }
    }

    pub fn velocity(&self, corr: &Corrector, grid: &TimeGrid, k: usize) -> VectorField {
        self.w[k].axpy(1.0, &corr.phi(grid.time(k)))
    }

    pub fn pressure(&self, corr: &Corrector, k: usize) -> ScalarField {
        self.q_w[k].axpy(1.0, &corr.q_phi)
    }

    pub fn velocities(&self, corr: &Corrector, grid: &TimeGrid) -> Vec<VectorField> {
        (0..self.w.len()).map(|k| self.velocity(corr, grid, k)).collect()
    }
}

/// `(f̃, g̃, h̃)` at one time level for velocity `v`, pressure `q` and flow
/// level `k`. All three vanish identically when `X = α`.
pub fn assemble_level(dom: &DiscreteDomain, flow: &FlowMap, k: usize, v: &VectorField, q: &[f64]) -> Result<(VectorField, ScalarField, Vec<Vec2>)> {
    let n = dom.len();
    let ops = dom.ops();
    let zeta = flow.inverse_deformation(dom, k)?;
    let frames = flow.frames(dom, k)?;
    // ∂_k(ζ − I)_{lj}
    let dzeta: [[[Vec<f64>; 2]; 2]; 2] = [0, 1].map(|kk| {
        [0, 1].map(|l| {
            [0, 1].map(|j| {
                let e: Vec<f64> = zeta.iter().map(|z| z.get(l, j) - Mat2::IDENTITY.get(l, j)).collect();
                ops.d[kk].apply(&e)
            })
        })
    });
    let grad = dom.gradient(v);
    let gq = dom.gradient_scalar(q);
    let hess: [[Vec<f64>; 3]; 2] = [0, 1].map(|c| [0, 1, 2].map(|s| ops.dd[s].apply(v.component(c))));
    let mut f = VectorField::zeros(n);
    let mut g = ScalarField::zeros(n);
    for p in 0..n {
        let z = zeta[p];
        let m = z * z.transpose();
        let mut b = [0.0; 2];
        for (l, bl) in b.iter_mut().enumerate() {
            for kk in 0..2 {
                for j in 0..2 {
                    *bl += z.get(kk, j) * dzeta[kk][l][j][p];
                }
            }
        }
        let (a, ax) = (dom.frame(p), &frames[p]);
        let px = (z * ax.a).transpose().mul_vec(gq[p]);
        let pa = a.a.transpose().mul_vec(gq[p]);
        let mut fp = [0.0; 2];
        for (c, fc) in fp.iter_mut().enumerate() {
            let [h11, h12, h22] = [hess[c][0][p], hess[c][1][p], hess[c][2][p]];
            let mh = m.get(0, 0) * h11 + m.get(0, 1) * h12 + m.get(1, 0) * h12 + m.get(1, 1) * h22;
            let bg = b[0] * grad[p].get(c, 0) + b[1] * grad[p].get(c, 1);
            *fc = ax.q2 * (mh + bg) - a.q2 * (h11 + h22) - px[c] + pa[c];
        }
        f.set(p, fp);
        g[p] = -(grad[p] * z * ax.a).trace() + (grad[p] * a.a).trace();
    }
    let normals = flow.moved_normals(dom, k, &frames);
    let h = dom
        .boundary()
        .map(|b| {
            let sx = symmetric(grad[b] * zeta[b] * frames[b].a).mul_vec(normals[b]);
            let n0 = dom.stress_normal(b);
            let s0 = symmetric(grad[b] * dom.frame(b).a).mul_vec(n0);
            let nx = normals[b];
            [0, 1].map(|c| (sx[c] - s0[c]) + (q[b] * n0[c] - q[b] * nx[c]))
        })
        .collect();
    Ok((f, g, h))
}

/// `(f̃, g̃, h̃)` of an iterate on every level, with `v = w + φ`,
/// `q = q_w + q_φ`; `v0` is the iterate's initial velocity.
pub fn assemble_rhs(dom: &DiscreteDomain, grid: &TimeGrid, state: &IterationState, corr: &Corrector) -> Result<LinearData> {
    let mut data = LinearData::zeros(dom, grid);
    for k in 0..grid.levels() {
        let (f, g, h) = assemble_level(dom, &state.flow, k, &state.velocity(corr, grid, k), &state.pressure(corr, k))?;
        data.f[k] = f;
        data.g[k] = g;
        data.h[k] = h;
    }
    data.v0 = state.velocity(corr, grid, 0);
    Ok(data)
}

/// Data of the problem for `w`: `(f̃ + f^φ, g̃ − Tr(∇φA), h̃ − q_φn' + S(φ)n')`
/// with zero initial velocity.
pub fn corrected_rhs(dom: &DiscreteDomain, grid: &TimeGrid, state: &IterationState, corr: &Corrector) -> Result<LinearData> {
    let mut data = assemble_rhs(dom, grid, state, corr)?;
    for k in 0..grid.levels() {
        let t = grid.time(k);
        data.f[k] = data.f[k].axpy(1.0, &corr.forcing(t));
        data.g[k] = data.g[k].axpy(1.0, &corr.divergence_datum(dom, t));
        let hs = corr.stress_datum(dom, t);
        data.h[k].iter_mut().zip(hs).for_each(|(h, s)| *h = [h[0] + s[0], h[1] + s[1]]);
    }
    data.v0 = VectorField::zeros(dom.len());
    Ok(data)
}

/// The split `ḡ = g̃ + Tr(∇φ ζ_φ A_φ) − Tr(∇φA)` at level `k`, returned
/// with the subtracted part `Tr(∇φ ζ_φ A_φ)`; their difference is the
/// divergence datum of the problem for `w`.
pub fn divergence_split(dom: &DiscreteDomain, grid: &TimeGrid, state: &IterationState, corr: &Corrector, k: usize) -> Result<(ScalarField, ScalarField)> {
    let t = grid.time(k);
    let (_, g, _) = assemble_level(dom, &state.flow, k, &state.velocity(corr, grid, k), &state.pressure(corr, k))?;
    let gphi = dom.gradient(&corr.phi(t));
    let (zp, ap) = (corr.zeta(t), corr.frame(dom, t));
    let moved: Vec<f64> = (0..dom.len()).map(|i| (gphi[i] * zp[i] * ap[i]).trace()).collect();
    let fixed: Vec<f64> = (0..dom.len()).map(|i| (gphi[i] * dom.frame(i).a).trace()).collect();
    let gbar = (0..dom.len()).map(|i| g[i] + moved[i] - fixed[i]).collect();
    Ok((ScalarField(gbar), ScalarField(moved)))
}

/// `X^{new}(t) = X(0) + ∫₀ᵗ A∘X^{prev} v` by the trapezoid rule per node.
pub fn flow_update(dom: &DiscreteDomain, grid: &TimeGrid, prev: &FlowMap, v: &[VectorField]) -> Result<FlowMap> {
    if prev.levels() != grid.levels() || v.len() != grid.levels() {
        return Err(Error::InvalidInput("flow map and velocity do not match the time grid".into()));
    }
    prev.inverse_deformation(dom, 0)?;
    let dt = grid.dt();
    let rate = |k: usize| -> Result<VectorField> {
        let frames = prev.frames(dom, k)?;
        Ok(VectorField::from_fn(dom.len(), |i| frames[i].a.mul_vec(v[k].at(i))))
    };
    let mut out = vec![prev.displacement[0].clone()];
    let mut last = rate(0)?;
    for k in 1..grid.levels() {
        let next = rate(k)?;
        let step = last.axpy(1.0, &next).scaled(0.5 * dt);
        out.push(out[k - 1].axpy(1.0, &step));
        last = next;
    }
    let flow = FlowMap { displacement: out };
    for k in 1..grid.levels() {
        flow.inverse_deformation(dom, k)?;
    }
    Ok(flow)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig {
    pub max_iter: usize,
    /// Stop once the combined difference norm drops below this.
    pub tol: f64,
    /// Or below this fraction of the first difference.
    pub rel_tol: f64,
    /// Regularity index of the convergence norm.
    pub s: f64,
    /// Samples per side of the extension box used by the norms.
    pub box_n: usize,
    /// Largest admissible relative compatibility defect of the initial data.
    pub compat_tol: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            max_iter: 30,
            tol: 1e-8,
            rel_tol: 0.0,
            s: 2.25,
            box_n: 32,
            compat_tol: 5e-2,
        }
    }
}

/// Successive differences of one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `‖Δw‖_{H^{ht,s+1}}`
    pub velocity: f64,
    /// pressure-space proxy of `Δq_w`
    pub pressure: f64,
    /// `‖ΔY‖_{F^{s+1}}`
    pub flow: f64,
    pub total: f64,
    /// `total / previous total`, `None` on the first iteration.
    pub factor: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardRun {
    pub state: IterationState,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    /// `∂_t w(0)` from the semi-discrete equation, `Q²Δw(0) + f(0)`.
    pub initial_rate: f64,
    /// `max |Aᵀ∇q_w(0)|`, the pressure part left out of `initial_rate`.
    pub initial_pressure_rate: f64,
    /// `max |w(t₁) − w(0)| / t₁`
    pub initial_rate_fd: f64,
}

impl PicardRun {
    pub fn factors(&self) -> Vec<f64> {
        self.history.iter().filter_map(|r| r.factor).collect()
    }

    /// Largest factor over the last `m` iterations.
    pub fn tail_factor(&self, m: usize) -> Option<f64> {
        let f = self.factors();
        let tail = &f[f.len().saturating_sub(m)..];
        tail.iter().copied().reduce(f64::max)
    }

    /// Geometric bound on the remaining distance to the fixed point.
    pub fn tail_bound(&self) -> f64 {
        let last = self.history.last().map_or(0.0, |r| r.total);
        match self.tail_factor(3) {
            Some(f) if f < 1.0 => last * f / (1.0 - f),
            Some(_) => f64::INFINITY,
            None => last,
        }
    }
}

/// Combined norm of the difference of two iterates.
fn difference(dom: &DiscreteDomain, ext: &DiskExtension, grid: &TimeGrid, s: f64, a: &IterationState, b: &IterationState) -> Result<[f64; 3]> {
    let t = grid.t_end();
    let dw: Vec<VectorField> = a.w.iter().zip(&b.w).map(|(x, y)| x.axpy(-1.0, y)).collect();
    let dq: Vec<ScalarField> = a.q_w.iter().zip(&b.q_w).map(|(x, y)| x.axpy(-1.0, y)).collect();
    let dy: Vec<VectorField> = a
        .flow
        .displacement
        .iter()
        .zip(&b.flow.displacement)
        .map(|(x, y)| x.axpy(-1.0, y))
        .collect();
    let velocity = parabolic_norm(&ext.vector_history(t, &dw)?, &NormSpec::new(NormKind::Ht, s + 1.0));
    let pressure = pressure_norm(dom, ext, t, &dq, s)?;
    let flow = parabolic_norm(&ext.vector_history(t, &dy)?, &NormSpec::new(NormKind::F, s));
    Ok([velocity, pressure, flow])
}

/// Full run from `v₀` with the identity as initial flow map.
pub fn picard_run(dom: &DiscreteDomain, grid: TimeGrid, v0: &VectorField, config: &PicardConfig) -> Result<PicardRun> {
    let stepper = Stepper::new(dom, grid)?;
    let corr = Corrector::with_solver(dom, stepper.poisson(), v0)?;
    picard_iterate(dom, &stepper, &corr, None, config)
}

/// Picard iteration with prepared factorizations, corrector and an optional
/// initial displacement of the flow map.
pub fn picard_iterate(dom: &DiscreteDomain, stepper: &Stepper, corr: &Corrector, y0: Option<&VectorField>, config: &PicardConfig) -> Result<PicardRun> {
    let grid = *stepper.grid();
    let ext = DiskExtension::new(dom.grid(), config.box_n)?;
    let mut state = IterationState::seed(dom, &grid, y0);
    let mut stepper = stepper.clone();
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut above = 0;
    let mut converged = false;
    let mut rates = (0.0, 0.0, 0.0);
    for n in 1..=config.max_iter {
        let clock = Instant::now();
        let data = corrected_rhs(dom, &grid, &state, corr)?;
        if n == 1 {
            // measured against the size of ∇v₀, since the corrected data start from rest
            let compat = data.compatibility(dom);
            let scale = grad_a(dom, &corr.v0).iter().map(Mat2::max_abs).fold(compat.scale, f64::max);
            let c = compat.divergence.max(compat.tangential) / scale;
            if c > config.compat_tol {
                return Err(Error::CompatibilityViolated {
                    what: "relative compatibility defect of v₀",
                    value: c,
                    tolerance: config.compat_tol,
                });
            }
            stepper.compat_tol = stepper.compat_tol.max(compat.relative() * (1.0 + 1e-9));
        }
        let sol = stepper.evolve(dom, &data)?;
        let flow = flow_update(dom, &grid, &state.flow, &state.velocities(corr, &grid))?;
        let next = IterationState {
            n,
            w: sol.v,
            q_w: sol.q,
            flow,
        };
        let [velocity, pressure, flow] = difference(dom, &ext, &grid, config.s, &next, &state)?;
        let total = velocity + pressure + flow;
        let factor = history.last().map(|r| if r.total > 0.0 { total / r.total } else { 0.0 });
        history.push(IterationRecord {
            iteration: n,
            velocity,
            pressure,
            flow,
            total,
            factor,
            seconds: clock.elapsed().as_secs_f64(),
        });
        rates = initial_rates(dom, &grid, &next, &data);
        state = next;
        if !total.is_finite() {
            return Err(Error::ResolutionLost(format!("non-finite iterate at iteration {n}")));
        }
        if total < config.tol || total < config.rel_tol * history[0].total {
            converged = true;
            break;
        }
        above = if factor.is_some_and(|f| f > 1.0) { above + 1 } else { 0 };
        if above >= 3 {
            return Err(Error::NoContraction {
                iteration: n,
                factor: factor.unwrap_or(f64::INFINITY),
            });
        }
    }
    Ok(PicardRun {
        state,
        history,
        converged,
        initial_rate: rates.0,
        initial_pressure_rate: rates.1,
        initial_rate_fd: rates.2,
    })
}

fn initial_rates(dom: &DiscreteDomain, grid: &TimeGrid, state: &IterationState, data: &LinearData) -> (f64, f64, f64) {
    let lap = scaled_q2(dom, &dom.laplacian(&state.w[0]));
    let interior = |i: &usize| !dom.is_boundary(*i);
    let semi = lap.axpy(1.0, &data.f[0]);
    let semi = (0..dom.len()).filter(interior).fold(0.0_f64, |m, i| m.max(semi.at(i)[0].abs()).max(semi.at(i)[1].abs()));
    let p = a_gradient(dom, &state.q_w[0]);
    let p = (0..dom.len()).filter(interior).fold(0.0_f64, |m, i| m.max(p.at(i)[0].abs()).max(p.at(i)[1].abs()));
    let fd = state.w[1].axpy(-1.0, &state.w[0]).max_abs() / grid.time(1);
    (semi, p, fd)
}

/// Defects of the nonlinear system at an iterate, relative to `max |v|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearResidual {
    /// Momentum with moving frames at interior nodes.
    pub momentum: f64,
    /// `Tr(∇vζA∘X)` at boundary nodes.
    pub divergence: f64,
    /// `(qI − S_X)(A∘X)⁻¹∇_J X ñ₀`
    pub stress: f64,
    /// `X − α − ∫ A∘X v`
    pub flow: f64,
}

impl NonlinearResidual {
    pub fn max(&self) -> f64 {
        self.momentum.max(self.divergence).max(self.stress).max(self.flow)
    }
}

/// Re-assembles the nonlinear equations at `state`, with the time derivative
/// of `v = w + φ` taken as the scheme's difference of `w` plus `∂_tφ`.
pub fn nonlinear_residual(dom: &DiscreteDomain, grid: &TimeGrid, state: &IterationState, corr: &Corrector) -> Result<NonlinearResidual> {
    let dt = grid.dt();
    let vs = state.velocities(corr, grid);
    let scale = vs.iter().map(VectorField::max_abs).fold(f64::MIN_POSITIVE, f64::max);
    let mut r = NonlinearResidual {
        momentum: 0.0,
        divergence: 0.0,
        stress: 0.0,
        flow: 0.0,
    };
    for k in 1..grid.levels() {
        let t = grid.time(k);
        let wt = if k == 1 {
            state.w[1].axpy(-1.0, &state.w[0]).scaled(1.0 / dt)
        } else {
            state.w[k].scaled(1.5 / dt).axpy(-2.0 / dt, &state.w[k - 1]).axpy(0.5 / dt, &state.w[k - 2])
        };
        let vt = wt.axpy(1.0, &corr.phi_rate(t));
        let v = &vs[k];
        let q = state.pressure(corr, k);
        let (f, g, h) = assemble_level(dom, &state.flow, k, v, &q)?;
        // moving-frame momentum = f̃ + Q²Δv − Aᵀ∇q
        let visc = scaled_q2(dom, &dom.laplacian(v));
        let grad_q = a_gradient(dom, &q);
        for i in (0..dom.len()).filter(|i| !dom.is_boundary(*i)) {
            for c in 0..2 {
                let m = vt.at(i)[c] - (f.at(i)[c] + visc.at(i)[c] - grad_q.at(i)[c]);
                r.momentum = r.momentum.max(m.abs() / scale);
            }
        }
        let ga = grad_a(dom, v);
        let sn = crate::elliptic::boundary_stress(dom, v, &q);
        for b in dom.boundary() {
            // Tr(∇vζA∘X) = Tr(∇vA) − g̃; (qI − S_X)n_X = (qI − S)n' − h̃
            r.divergence = r.divergence.max((ga[b].trace() - g[b]).abs() / scale);
            for c in 0..2 {
                r.stress = r.stress.max((sn[b][c] - h[b][c]).abs() / scale);
            }
        }
    }
    let again = flow_update(dom, grid, &state.flow, &vs)?;
    for (a, b) in again.displacement.iter().zip(&state.flow.displacement) {
        r.flow = r.flow.max(a.axpy(-1.0, b).max_abs() / scale);
    }
    Ok(r)
}
