//! Structural-stability and refinement studies.

use std::fmt;
use std::str::FromStr;

use crate::conformal::{map_inverse, FrameModel, PlanePoint};
use crate::elliptic::{a_divergence, boundary_stress, solve_weighted_poisson};
use crate::error::{Error, Result};
use crate::fixedpoint::{picard_run, PicardConfig};
use crate::grid::maps::LogDisk;
use crate::grid::{DiscreteDomain, PolarGrid, ScalarField, VectorField};
use crate::stokes::{evolve as evolve_linear, LinearData, TimeGrid};

use super::config::{Perturbation, RunMode, ScenarioConfig};
use super::scenario::{evolve, initial_state};

/// Node positions at every output time of one run.
fn trajectory(cfg: &ScenarioConfig) -> Result<Vec<Vec<PlanePoint>>> {
    let state = initial_state(cfg)?;
    let mut frames = Vec::new();
    evolve(cfg, &state, &mut |f| {
        frames.push(f.positions.clone());
        Ok(true)
    })?;
    Ok(frames)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRow {
    pub eps: f64,
    /// `sup_t max_nodes |X − X_ε|` in the perturbed plane.
    pub distance: f64,
}

impl StabilityRow {
    pub fn per_eps(&self) -> f64 {
        self.distance / self.eps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityTable {
    pub perturb: Perturbation,
    pub rows: Vec<StabilityRow>,
}

impl StabilityTable {
    /// `d(ε_b)/d(ε_a)` for every ordered pair `a < b` of rows.
    pub fn pairwise_ratios(&self) -> Vec<(f64, f64, f64)> {
        let r = &self.rows;
        let mut out = Vec::new();
        for a in 0..r.len() {
            for b in a + 1..r.len() {
                out.push((r[a].eps, r[b].eps, r[b].distance / r[a].distance));
            }
        }
        out
    }

    pub fn distance(&self, eps: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.eps == eps).map(|r| r.distance)
    }
}

fn distance(base: &[Vec<PlanePoint>], other: &[Vec<PlanePoint>], plane: Perturbation, mode: RunMode) -> Result<f64> {
    if base.len() != other.len() {
        return Err(Error::InvalidInput(format!(
            "runs produced {} and {} output times",
            base.len(),
            other.len()
        )));
    }
    let lift = |p: PlanePoint| match (plane, mode) {
        (Perturbation::Physical, RunMode::Solver) => map_inverse(p),
        _ => p,
    };
    let mut sup = 0.0_f64;
    for (a, b) in base.iter().zip(other) {
        for (p, q) in a.iter().zip(b) {
            sup = sup.max(lift(*p).dist(&lift(*q)));
        }
    }
    Ok(sup)
}

/// Base run against `ε`-translated runs on the same grid and time steps.
/// Runs are independent and execute concurrently.
pub fn stability_study(cfg: &ScenarioConfig, eps_list: &[f64]) -> Result<StabilityTable> {
    if let Some(e) = eps_list.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
        return Err(Error::OutOfRange { what: "eps", value: *e, range: "[0, ∞)" });
    }
    let base_cfg = cfg.with_eps(0.0);
    let runs: Vec<Result<Vec<Vec<PlanePoint>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = std::iter::once(&base_cfg)
            .cloned()
            .chain(eps_list.iter().map(|&e| cfg.with_eps(e)))
            .map(|c| scope.spawn(move || trajectory(&c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::IllPosed("stability run panicked".into()))))
            .collect()
    });
    let mut runs = runs.into_iter();
    let base = runs.next().expect("base run")?;
    let rows = eps_list
        .iter()
        .zip(runs)
        .map(|(&eps, run)| {
            Ok(StabilityRow {
                eps,
                distance: distance(&base, &run?, cfg.perturb, cfg.mode)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(StabilityTable { perturb: cfg.perturb, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Poisson,
    StokesLinear,
    Picard,
}

impl FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(StudyKind::Poisson),
            "stokes_linear" | "stokes" => Ok(StudyKind::StokesLinear),
            "picard" => Ok(StudyKind::Picard),
            _ => Err(Error::InvalidInput(format!("unknown study `{s}` (poisson, stokes_linear, picard)"))),
        }
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StudyKind::Poisson => "poisson",
            StudyKind::StokesLinear => "stokes_linear",
            StudyKind::Picard => "picard",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub kind: StudyKind,
    /// Radial grid spacing per level.
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log h`.
    pub order: f64,
}

/// Least-squares slope of `log y` against `log x`, with the intercept.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn bean(nr: usize, nt: usize) -> Result<DiscreteDomain> {
    let map = LogDisk { mu: 0.2, a: 0.25, b: 0.8 };
    DiscreteDomain::from_map(&map, PolarGrid::new(nr, nt)?, FrameModel::default())
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// `Q²Δψ = −(x² + y²) sin(xy) Q²` with `ψ = x² − y² + sin(xy)`.
fn poisson_error(nr: usize, nt: usize) -> Result<(f64, f64)> {
    let dom = bean(nr, nt)?;
    let exact = dom.sample_scalar(|p| p.x * p.x - p.y * p.y + (p.x * p.y).sin());
    let rhs: Vec<f64> = (0..dom.len())
        .map(|i| {
            let p = dom.nodes()[i];
            -(p.x * p.x + p.y * p.y) * (p.x * p.y).sin() * dom.frame(i).q2
        })
        .collect();
    let bc: Vec<f64> = dom.boundary().map(|i| exact[i]).collect();
    let got = solve_weighted_poisson(&dom, &rhs, &bc)?;
    Ok((dom.grid().drho(), max_diff(&got, &exact)))
}

fn manufactured_velocity(p: PlanePoint) -> [f64; 2] {
    [p.y.sin(), p.x.cos()]
}

/// `(cos t · (sin y, cos x), cos t · xy)` with analytic force and discrete
/// divergence and stress data; sup error over all levels.
fn stokes_error(nr: usize, nt: usize, steps: usize) -> Result<(f64, f64)> {
    let dom = bean(nr, nt)?;
    let grid = TimeGrid::new(0.5, steps)?;
    let n = dom.len();
    let vel = dom.sample_vector(manufactured_velocity);
    let pre = dom.sample_scalar(|p| p.x * p.y);
    let mut data = LinearData::zeros(&dom, &grid);
    data.v0 = vel.clone();
    for (k, t) in grid.times().into_iter().enumerate() {
        data.f[k] = VectorField::from_fn(n, |i| {
            let p = dom.nodes()[i];
            let fr = dom.frame(i);
            let [v0, v1] = manufactured_velocity(p);
            let grad_q = fr.a.transpose().mul_vec([p.y, p.x]);
            [
                -t.sin() * v0 + fr.q2 * t.cos() * p.y.sin() + t.cos() * grad_q[0],
                -t.sin() * v1 + fr.q2 * t.cos() * p.x.cos() + t.cos() * grad_q[1],
            ]
        });
        let vk = vel.scaled(t.cos());
        data.g[k] = a_divergence(&dom, &vk);
        data.h[k] = boundary_stress(&dom, &vk, &ScalarField(pre.iter().map(|q| q * t.cos()).collect()));
    }
    let sol = evolve_linear(&dom, grid, &data)?;
    let err = grid
        .times()
        .iter()
        .zip(&sol.v)
        .map(|(t, v)| v.axpy(-t.cos(), &vel).max_abs())
        .fold(0.0, f64::max);
    Ok((dom.grid().drho(), err))
}

/// Rigid physical rotation about the image of the map center.
fn rotation(dom: &DiscreteDomain, omega: f64) -> VectorField {
    let c = map_inverse(PlanePoint::new(0.2_f64.exp(), 0.0));
    VectorField::from_fn(dom.len(), |i| {
        let z = map_inverse(dom.nodes()[i]);
        [-omega * (z.y - c.y), omega * (z.x - c.x)]
    })
}

const PICARD_T: f64 = 0.02;

/// Boundary positions at the final time of a converged run.
fn picard_boundary(level: usize) -> Result<(f64, Vec<PlanePoint>)> {
    let m = 1 << level;
    let dom = bean(5 * m, 20 * m)?;
    let grid = TimeGrid::new(PICARD_T, 2 * m)?;
    let config = PicardConfig {
        tol: 0.0,
        rel_tol: 1e-8,
        compat_tol: 0.5,
        ..PicardConfig::default()
    };
    let run = picard_run(&dom, grid, &rotation(&dom, 1.0), &config)?;
    let last = grid.levels() - 1;
    let pts = dom.boundary().map(|b| run.state.flow.position(&dom, last, b)).collect();
    Ok((dom.grid().drho(), pts))
}

/// Runs nested refinements and fits the observed order. The Picard study
/// compares final boundary positions at shared angles between successive
/// levels, so it runs one level more than it reports.
pub fn convergence_study(kind: StudyKind, levels: usize) -> Result<ConvergenceStudy> {
    if levels < 3 {
        return Err(Error::OutOfRange { what: "levels", value: levels as f64, range: "[3, ∞)" });
    }
    let pairs: Vec<(f64, f64)> = match kind {
        StudyKind::Poisson => (0..levels).map(|l| poisson_error(10 << l, 32 << l)).collect::<Result<_>>()?,
        StudyKind::StokesLinear => (0..levels).map(|l| stokes_error(8 << l, 32 << l, 4 << l)).collect::<Result<_>>()?,
        StudyKind::Picard => {
            let runs: Vec<Result<(f64, Vec<PlanePoint>)>> = std::thread::scope(|scope| {
                let handles: Vec<_> = (0..=levels).map(|l| scope.spawn(move || picard_boundary(l))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(Error::IllPosed("refinement run panicked".into()))))
                    .collect()
            });
            let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
            runs.windows(2)
                .map(|w| {
                    let ((h, coarse), (_, fine)) = (&w[0], &w[1]);
                    let stride = fine.len() / coarse.len();
                    let err = coarse.iter().enumerate().fold(0.0_f64, |m, (j, p)| m.max(p.dist(&fine[j * stride])));
                    (*h, err)
                })
                .collect()
        }
    };
    let (h, errors): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let order = loglog_fit(&h, &errors).0;
    Ok(ConvergenceStudy { kind, h, errors, order })
}
