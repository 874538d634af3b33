//! The splash scenario: evolve the boundary, classify its preimage at every
//! output time and bisect the first loss of simplicity.

use std::f64::consts::{PI, TAU};
use std::fs::File;
use std::io::BufReader;

use crate::conformal::{map_forward, map_inverse, FrameModel, PlanePoint};
use crate::curve::io::read_curve;
use crate::curve::{arc_distance, chord_arc_constant, classify_polyline, ClosedCurve, PreimageCase, PreimageKind};
use crate::error::{Error, Result};
use crate::fixedpoint::{picard_iterate, Corrector};
use crate::grid::maps::{DiskMap, HarmonicDisk};
use crate::grid::{DiscreteDomain, PolarGrid, VectorField};
use crate::initdata::{build_stream, restore_compatibility, physical_boundary, set_splash_velocity, BoundaryStream, SplashAim};
use crate::stokes::{Stepper, TimeGrid};

use super::config::{CurveSource, Perturbation, RunMode, ScenarioConfig, SlotSpec};

/// Plane in which positions are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    Tilde,
    Physical,
}

/// Boundary index ranges `[start, end)` of the two arcs whose approach is
/// monitored. Ranges wrap around.
pub type ArcPair = [(usize, usize); 2];

/// Prepared initial data of a run.
#[derive(Debug, Clone)]
pub enum InitialState {
    Solver {
        domain: DiscreteDomain,
        v0: VectorField,
        arcs: ArcPair,
    },
    Kinematic {
        /// Physical curve samples.
        curve: Vec<PlanePoint>,
        /// Signed vertical velocity of each sample.
        velocity: Vec<f64>,
        arcs: ArcPair,
    },
}

impl InitialState {
    pub fn arcs(&self) -> ArcPair {
        match self {
            InitialState::Solver { arcs, .. } | InitialState::Kinematic { arcs, .. } => *arcs,
        }
    }

    pub fn plane(&self) -> Plane {
        match self {
            InitialState::Solver { .. } => Plane::Tilde,
            InitialState::Kinematic { .. } => Plane::Physical,
        }
    }

    /// Boundary positions at `t = 0` in [`InitialState::plane`].
    pub fn boundary(&self) -> Vec<PlanePoint> {
        match self {
            InitialState::Solver { domain, .. } => domain.boundary().map(|i| domain.nodes()[i]).collect(),
            InitialState::Kinematic { curve, .. } => curve.clone(),
        }
    }
}

fn base_map(source: &CurveSource) -> Result<Box<dyn DiskMap>> {
    Ok(match source {
        CurveSource::LogDisk(m) => Box::new(*m),
        CurveSource::File(path) => {
            let curve = read_curve(BufReader::new(File::open(path)?))?;
            Box::new(HarmonicDisk::from_curve(&curve)?)
        }
    })
}

fn nearest_boundary_node(grid: &PolarGrid, angle: f64) -> usize {
    let nt = grid.angles();
    let j = (angle.rem_euclid(TAU) / grid.dtheta()).round() as usize;
    j % nt
}

fn arc_around(center: usize, half: usize, nt: usize) -> (usize, usize) {
    ((center + nt - half) % nt, (center + half) % nt)
}

fn solver_state(cfg: &ScenarioConfig) -> Result<InitialState> {
    let grid = PolarGrid::new(cfg.nr, cfg.nt)?;
    let map = base_map(&cfg.source)?;
    let base = DiscreteDomain::from_map(map.as_ref(), grid.clone(), FrameModel::default())?;
    let (amp, k) = (cfg.stream_amplitude, f64::from(cfg.stream_mode));
    let init = build_stream(&base, BoundaryStream::from_fn(&base, |u| amp * (TAU * k * u).sin())?, None)?;
    let nt = grid.angles();
    let idx = cfg.aim_arcs.map(|a| nearest_boundary_node(&grid, a));
    if idx[0] == idx[1] {
        return Err(Error::InvalidInput("designated arcs share their center node".into()));
    }
    let phys = physical_boundary(&base);
    let (p, q) = (phys[idx[0]], phys[idx[1]]);
    let len = p.dist(&q);
    let toward = [(q.x - p.x) / len, (q.y - p.y) / len];
    let aim = SplashAim {
        points: [p, q],
        directions: [toward, [-toward[0], -toward[1]]],
        amplitude: cfg.aim_amplitude,
    };
    let v0 = set_splash_velocity(&base, &init, &aim, None)?.v0;
    let shift = [cfg.eps * cfg.direction[0], cfg.eps * cfg.direction[1]];
    let domain = match cfg.perturb {
        Perturbation::Tilde => base.with_frames(FrameModel::Conformal { shift })?,
        Perturbation::Physical => {
            let nodes = base
                .nodes()
                .iter()
                .map(|&a| {
                    let z = map_inverse(a);
                    map_forward(PlanePoint::new(z.x + shift[0], z.y + shift[1]), &cfg.cut)
                })
                .collect::<Result<Vec<_>>>()?;
            DiscreteDomain::from_nodes(grid, nodes, FrameModel::default())?
        }
    };
    let half = cfg.arc_halfwidth.unwrap_or(nt / 16).max(1);
    let arcs = idx.map(|c| arc_around(c, half, nt));
    Ok(InitialState::Solver { domain, v0, arcs })
}

/// Square `[−2, 2]²` minus the slot `{x < −½, |y| < gap/2}`, sampled uniformly
/// in arclength from `(2, 0)`, counter-clockwise.
fn slot_polygon(gap: f64) -> Vec<PlanePoint> {
    let g = 0.5 * gap;
    [
        (2.0, 0.0),
        (2.0, 2.0),
        (-2.0, 2.0),
        (-2.0, g),
        (-0.5, g),
        (-0.5, -g),
        (-2.0, -g),
        (-2.0, -2.0),
        (2.0, -2.0),
        (2.0, 0.0),
    ]
    .iter()
    .map(|&(x, y)| PlanePoint::new(x, y))
    .collect()
}

fn sample_polyline(vertices: &[PlanePoint], n: usize) -> Vec<PlanePoint> {
    let lengths: Vec<f64> = vertices.windows(2).map(|w| w[0].dist(&w[1])).collect();
    let total: f64 = lengths.iter().sum();
    let mut out = Vec::with_capacity(n);
    let (mut seg, mut start) = (0, 0.0);
    for k in 0..n {
        let s = total * k as f64 / n as f64;
        while seg + 1 < lengths.len() && s >= start + lengths[seg] {
            start += lengths[seg];
            seg += 1;
        }
        let u = (s - start) / lengths[seg];
        let (a, b) = (vertices[seg], vertices[seg + 1]);
        out.push(PlanePoint::new(a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)));
    }
    out
}

/// Arm velocity: full speed left of `x = −0.55`, tapering to rest at the
/// slot end.
fn arm_speed(p: PlanePoint, slot: &SlotSpec) -> f64 {
    let g = 0.5 * slot.gap;
    if (p.y.abs() - g).abs() > 1e-12 * g || p.x > -0.5 {
        return 0.0;
    }
    let ramp = ((-0.5 - p.x) / 0.05).clamp(0.0, 1.0);
    -p.y.signum() * slot.speed * ramp
}

fn index_run(flags: &[bool]) -> Result<(usize, usize)> {
    let first = flags.iter().position(|&f| f);
    let last = flags.iter().rposition(|&f| f);
    match (first, last) {
        (Some(a), Some(b)) if flags[a..=b].iter().all(|&f| f) && b > a => Ok((a, b)),
        _ => Err(Error::IllPosed("slot arm is not sampled contiguously".into())),
    }
}

fn kinematic_state(cfg: &ScenarioConfig) -> Result<InitialState> {
    let slot = cfg.slot;
    let samples = sample_polyline(&slot_polygon(slot.gap), slot.samples);
    let velocity: Vec<f64> = samples.iter().map(|p| arm_speed(*p, &slot)).collect();
    let full = |p: &PlanePoint, v: f64, upper: bool| v.abs() == slot.speed && (p.y > 0.0) == upper;
    let upper: Vec<bool> = samples.iter().zip(&velocity).map(|(p, v)| full(p, *v, true)).collect();
    let lower: Vec<bool> = samples.iter().zip(&velocity).map(|(p, v)| full(p, *v, false)).collect();
    let arcs = [index_run(&upper)?, index_run(&lower)?];
    let shift = [cfg.eps * cfg.direction[0], cfg.eps * cfg.direction[1]];
    let curve = samples.iter().map(|p| PlanePoint::new(p.x + shift[0], p.y + shift[1])).collect();
    Ok(InitialState::Kinematic { curve, velocity, arcs })
}

/// Builds the initial data and checks that its preimage is simple.
pub fn initial_state(cfg: &ScenarioConfig) -> Result<InitialState> {
    let state = match cfg.mode {
        RunMode::Solver => solver_state(cfg)?,
        RunMode::Kinematic => kinematic_state(cfg)?,
    };
    let case = classify(&state.boundary(), state.plane(), cfg.touch_tol)?;
    if case.case != PreimageKind::CaseASimple {
        return Err(Error::IllPosed(format!(
            "initial preimage is {:?}, not simple; reduce eps or refine",
            case.case
        )));
    }
    Ok(state)
}

/// Physical curve through `points`.
pub fn physical_curve(points: &[PlanePoint], plane: Plane) -> Result<ClosedCurve> {
    let pts = match plane {
        Plane::Tilde => points.iter().map(|&p| map_inverse(p)).collect(),
        Plane::Physical => points.to_vec(),
    };
    ClosedCurve::new(pts, TAU)
}

fn classify(points: &[PlanePoint], plane: Plane, touch_tol: f64) -> Result<PreimageCase> {
    classify_polyline(&physical_curve(points, plane)?, touch_tol)
}

/// One output time of an evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub time: f64,
    /// All tracked positions; the boundary comes first.
    pub positions: Vec<PlanePoint>,
    pub velocity_sup: f64,
}

/// Summary of one fixed-point window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowReport {
    pub start: f64,
    pub length: f64,
    pub iterations: usize,
    pub max_factor: f64,
    pub final_difference: f64,
}

/// Drives the evolution, handing each output frame (the initial one
/// included) to `visit` until it returns `false`.
pub fn evolve(cfg: &ScenarioConfig, state: &InitialState, visit: &mut dyn FnMut(&Frame) -> Result<bool>) -> Result<Vec<WindowReport>> {
    match state {
        InitialState::Kinematic { curve, velocity, .. } => {
            let dt = cfg.dt();
            for k in 0..=cfg.steps {
                let t = dt * k as f64;
                let positions = curve
                    .iter()
                    .zip(velocity)
                    .map(|(p, v)| PlanePoint::new(p.x, p.y + v * t))
                    .collect();
                let frame = Frame { time: t, positions, velocity_sup: cfg.slot.speed };
                if !visit(&frame)? {
                    break;
                }
            }
            Ok(Vec::new())
        }
        InitialState::Solver { domain, v0, .. } => evolve_solver(cfg, domain.clone(), v0.clone(), visit),
    }
}

fn evolve_solver(cfg: &ScenarioConfig, mut dom: DiscreteDomain, mut v0: VectorField, visit: &mut dyn FnMut(&Frame) -> Result<bool>) -> Result<Vec<WindowReport>> {
    let mut reports = Vec::new();
    let first = Frame { time: 0.0, positions: dom.nodes().to_vec(), velocity_sup: v0.max_abs() };
    if !visit(&first)? {
        return Ok(reports);
    }
    let windows = (cfg.horizon / cfg.window - 1e-9).ceil().max(1.0) as usize;
    for w in 0..windows {
        let start = cfg.window * w as f64;
        let length = cfg.window.min(cfg.horizon - start);
        let grid = TimeGrid::new(length, cfg.steps)?;
        let stepper = Stepper::new(&dom, grid)?;
        let corr = Corrector::with_solver(&dom, stepper.poisson(), &v0)?;
        let run = picard_iterate(&dom, &stepper, &corr, None, &cfg.picard)?;
        let max_factor = run.factors().into_iter().fold(0.0, f64::max);
        let last = run.history.last().map_or(0.0, |r| r.total);
        if !run.converged {
            return Err(Error::NoContraction { iteration: run.history.len(), factor: max_factor });
        }
        reports.push(WindowReport {
            start,
            length,
            iterations: run.history.len(),
            max_factor,
            final_difference: last,
        });
        let flow = &run.state.flow;
        let mut positions = Vec::new();
        for k in 1..grid.levels() {
            positions = (0..dom.len()).map(|i| flow.position(&dom, k, i)).collect();
            let v = run.state.velocity(&corr, &grid, k);
            let frame = Frame { time: start + grid.time(k), positions: positions.clone(), velocity_sup: v.max_abs() };
            if !visit(&frame)? {
                return Ok(reports);
            }
        }
        let carried = run.state.velocity(&corr, &grid, grid.levels() - 1);
        dom = DiscreteDomain::from_nodes(dom.grid().clone(), positions, dom.frame_model())?;
        v0 = restore_compatibility(&dom, &carried, None)?;
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineEntry {
    pub time: f64,
    pub case: PreimageKind,
    /// Least distance between the designated arcs of the physical curve.
    pub approach: f64,
    pub chord_arc: f64,
    /// `max |v|` over the nodes.
    pub velocity_sup: f64,
    /// Physical boundary.
    pub curve: Vec<PlanePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub t_star: f64,
    /// Last simple and first non-simple bisection time.
    pub bracket: (f64, f64),
    pub case: PreimageKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub horizon: f64,
    pub entries: Vec<TimelineEntry>,
    pub transition: Option<Transition>,
}

impl Timeline {
    pub fn t_star(&self) -> Result<f64> {
        self.transition
            .map(|t| t.t_star)
            .ok_or(Error::NoTouchWithinHorizon { horizon: self.horizon })
    }

    /// Output times at which the arc distance failed to decrease.
    pub fn approach_violations(&self) -> usize {
        self.entries.windows(2).filter(|w| !(w[1].approach < w[0].approach)).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub timeline: Timeline,
    pub windows: Vec<WindowReport>,
}

fn lerp(a: &[PlanePoint], b: &[PlanePoint], u: f64) -> Vec<PlanePoint> {
    a.iter()
        .zip(b)
        .map(|(p, q)| PlanePoint::new(p.x + u * (q.x - p.x), p.y + u * (q.y - p.y)))
        .collect()
}

fn entry(time: f64, boundary: &[PlanePoint], plane: Plane, arcs: ArcPair, case: PreimageKind, velocity_sup: f64) -> Result<TimelineEntry> {
    let curve = physical_curve(boundary, plane)?;
    Ok(TimelineEntry {
        time,
        case,
        approach: arc_distance(&curve, arcs[0], arcs[1]),
        chord_arc: chord_arc_constant(&curve),
        velocity_sup,
        curve: curve.points().to_vec(),
    })
}

/// Runs the scenario up to the first non-simple preimage or the horizon.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let state = initial_state(cfg)?;
    let (plane, arcs) = (state.plane(), state.arcs());
    let nb = state.boundary().len();
    let tol = cfg.bisection_tol();
    let mut entries: Vec<TimelineEntry> = Vec::new();
    let mut transition = None;
    let mut prev: Option<(f64, Vec<PlanePoint>)> = None;
    let mut visit = |frame: &Frame| -> Result<bool> {
        let boundary = &frame.positions[..nb];
        let case = classify(boundary, plane, cfg.touch_tol)?;
        if case.case == PreimageKind::CaseASimple {
            entries.push(entry(frame.time, boundary, plane, arcs, case.case, frame.velocity_sup)?);
            prev = Some((frame.time, boundary.to_vec()));
            return Ok(true);
        }
        let (t0, b0) = prev.as_ref().expect("the initial frame is simple");
        let span = frame.time - t0;
        let at = |t: f64| lerp(b0, boundary, (t - t0) / span);
        let (mut lo, mut hi, mut hi_case) = (*t0, frame.time, case.case);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            let c = classify(&at(mid), plane, cfg.touch_tol)?.case;
            if c == PreimageKind::CaseASimple {
                lo = mid;
            } else {
                (hi, hi_case) = (mid, c);
            }
        }
        if hi_case == PreimageKind::CaseCCrossing {
            return Err(Error::ResolutionLost(format!(
                "preimage crosses without a resolved touch in [{lo}, {hi}]"
            )));
        }
        let v = (frame.velocity_sup * (hi - t0) + entries.last().map_or(0.0, |e| e.velocity_sup) * (frame.time - hi)) / span;
        entries.push(entry(hi, &at(hi), plane, arcs, hi_case, v)?);
        transition = Some(Transition { t_star: 0.5 * (lo + hi), bracket: (lo, hi), case: hi_case });
        Ok(false)
    };
    let windows = evolve(cfg, &state, &mut visit)?;
    Ok(ScenarioOutcome {
        timeline: Timeline { horizon: cfg.horizon, entries, transition },
        windows,
    })
}

/// Reference angle at boundary node `j`, for reporting.
pub fn boundary_angle(nt: usize, j: usize) -> f64 {
    2.0 * PI * j as f64 / nt as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn kinematic(extra: &str) -> ScenarioConfig {
        let mut keys = std::collections::BTreeMap::new();
        for line in ["mode = kinematic", "horizon = 0.2", "steps = 8", "touch_tol = 1e-9", "time_tol = 1e-8"].into_iter().chain(extra.lines()) {
            let (k, v) = line.split_once('=').unwrap();
            keys.insert(k.trim().to_string(), v.trim().to_string());
        }
        let text: String = keys.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        ScenarioConfig::parse(&text, Path::new(".")).unwrap()
    }

    #[test]
    fn slot_samples_are_symmetric() {
        let pts = sample_polyline(&slot_polygon(0.1), 256);
        for k in 1..256 {
            let (p, q) = (pts[k], pts[256 - k]);
            assert!((p.x - q.x).abs() < 1e-12 && (p.y + q.y).abs() < 1e-12, "{k}: {p:?} {q:?}");
        }
    }

    #[test]
    fn kinematic_arcs_close_at_the_prescribed_rate() {
        let cfg = kinematic("");
        let state = initial_state(&cfg).unwrap();
        let mut gaps = Vec::new();
        evolve(&cfg, &state, &mut |f| {
            if f.time < 0.04 {
                let c = physical_curve(&f.positions, Plane::Physical).unwrap();
                gaps.push((f.time, arc_distance(&c, state.arcs()[0], state.arcs()[1])));
            }
            Ok(true)
        })
        .unwrap();
        for (t, g) in gaps {
            assert!((g - (0.1 - 2.0 * t)).abs() < 1e-13, "{t} {g}");
        }
    }

    #[test]
    fn kinematic_touch_time_is_bisected() {
        let cfg = kinematic("");
        let out = run_scenario(&cfg).unwrap();
        let tr = out.timeline.transition.unwrap();
        assert!((tr.t_star - cfg.slot.touch_time(cfg.touch_tol)).abs() < 1e-8);
        assert!(tr.bracket.1 - tr.bracket.0 <= 1e-8);
        assert_eq!(tr.case, PreimageKind::CaseBTouching);
        assert_eq!(out.timeline.approach_violations(), 0);
        let cases: Vec<_> = out.timeline.entries.iter().map(|e| e.case).collect();
        assert!(cases[..cases.len() - 1].iter().all(|c| *c == PreimageKind::CaseASimple));
    }

    #[test]
    fn bracket_ends_classify_on_either_side() {
        let cfg = kinematic("");
        let state = initial_state(&cfg).unwrap();
        let tr = run_scenario(&cfg).unwrap().timeline.transition.unwrap();
        let InitialState::Kinematic { curve, velocity, .. } = &state else { unreachable!() };
        let at = |t: f64| -> Vec<PlanePoint> { curve.iter().zip(velocity).map(|(p, v)| PlanePoint::new(p.x, p.y + v * t)).collect() };
        let tol = cfg.bisection_tol();
        assert_eq!(classify(&at(tr.t_star - tol), Plane::Physical, cfg.touch_tol).unwrap().case, PreimageKind::CaseASimple);
        assert_ne!(classify(&at(tr.t_star + tol), Plane::Physical, cfg.touch_tol).unwrap().case, PreimageKind::CaseASimple);
    }

    #[test]
    fn short_horizon_never_touches() {
        let cfg = kinematic("horizon = 0.02\n");
        let out = run_scenario(&cfg).unwrap();
        assert!(out.timeline.entries.iter().all(|e| e.case == PreimageKind::CaseASimple));
        assert!(matches!(out.timeline.t_star(), Err(Error::NoTouchWithinHorizon { .. })));
    }

    #[test]
    fn coarse_bisection_through_a_crossing_loses_resolution() {
        // the arms overshoot each other well within one output step
        let cfg = kinematic("touch_tol = 1e-12\ntime_tol = 0.01\nspeed = 1.3\n");
        let r = run_scenario(&cfg);
        assert!(matches!(r, Err(Error::ResolutionLost(_))), "{r:?}");
    }

    #[test]
    fn touching_initial_data_is_rejected() {
        let cfg = kinematic("touch_tol = 0.2\n");
        assert!(matches!(initial_state(&cfg), Err(Error::IllPosed(_))));
    }
}
