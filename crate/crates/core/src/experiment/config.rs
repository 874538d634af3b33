//! Scenario configuration: a flat `key = value` text file.
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `mode` | `solver` or `kinematic` | `solver` |
//! | `domain` | `logdisk` or `curve:<path>` (tilde boundary, period 2π) | `logdisk` |
//! | `mu`, `a`, `b` | log-disk parameters | `0`, `0.6`, `1.45` |
//! | `cut` | `principal` or `ray:<angle>` | `principal` |
//! | `eps` | translation size `ε ≥ 0` | `0` |
//! | `direction` | translation direction `bx,by`, normalized at load | `1,0` |
//! | `perturb` | `physical` or `tilde` | `physical` |
//! | `stream_amplitude`, `stream_mode` | `ψ₀(u) = amp·sin(2π k u)` in arclength fraction `u` | `0`, `1` |
//! | `aim_arcs` | two reference boundary angles of the designated arcs | `1.5707963267948966,4.71238898038469` |
//! | `aim_amplitude` | normal-velocity adjustment pushing the arcs together | `0` |
//! | `arc_halfwidth` | designated arc half-width, boundary nodes | `nt/16` |
//! | `horizon` | final time | `0.2` |
//! | `window` | length of one fixed-point window | `0.02` |
//! | `steps` | time steps per window (kinematic: output steps per horizon) | `4` |
//! | `nr`, `nt` | reference grid | `16`, `64` |
//! | `touch_tol` | distance below which arcs touch | `1e-3` |
//! | `time_tol` | bisection tolerance | `dt/10` |
//! | `picard_max_iter`, `picard_tol`, `picard_rel_tol`, `picard_s`, `compat_tol` | fixed-point controls; converged below `tol` or `rel_tol` times the first difference | `30`, `1e-7`, `1e-7`, `2.25`, `0.5` |
//! | `gap`, `speed`, `samples` | kinematic slot: initial gap, closing speed per arm, curve samples | `0.1`, `1`, `1024` |
//!
//! `#` starts a comment.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use crate::conformal::BranchCut;
use crate::error::{Error, Result};
use crate::fixedpoint::PicardConfig;
use crate::grid::maps::LogDisk;
use crate::linalg::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Solver,
    /// The curve moves by a prescribed velocity; no fluid solve.
    Kinematic,
}

/// Which plane the `ε`-translation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perturbation {
    /// `Ω₀ + εb`, carried to the tilde plane by the branch map.
    Physical,
    /// `Ω̃₀ + εb` with frames evaluated at the shifted points.
    Tilde,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurveSource {
    LogDisk(LogDisk),
    /// A sampled tilde boundary, extended harmonically.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotSpec {
    pub gap: f64,
    /// Closing speed of each arm.
    pub speed: f64,
    pub samples: usize,
}

impl SlotSpec {
    /// Time at which the arms come within `touch_tol`.
    pub fn touch_time(&self, touch_tol: f64) -> f64 {
        (self.gap - touch_tol) / (2.0 * self.speed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub mode: RunMode,
    pub source: CurveSource,
    pub cut: BranchCut,
    pub eps: f64,
    pub direction: Vec2,
    pub perturb: Perturbation,
    pub stream_amplitude: f64,
    pub stream_mode: u32,
    pub aim_arcs: [f64; 2],
    pub aim_amplitude: f64,
    pub arc_halfwidth: Option<usize>,
    pub horizon: f64,
    pub window: f64,
    pub steps: usize,
    pub nr: usize,
    pub nt: usize,
    pub touch_tol: f64,
    pub time_tol: Option<f64>,
    pub picard: PicardConfig,
    pub slot: SlotSpec,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            mode: RunMode::Solver,
            source: CurveSource::LogDisk(LogDisk { mu: 0.0, a: 0.6, b: 1.45 }),
            cut: BranchCut::principal(),
            eps: 0.0,
            direction: [1.0, 0.0],
            perturb: Perturbation::Physical,
            stream_amplitude: 0.0,
            stream_mode: 1,
            aim_arcs: [0.5 * PI, 1.5 * PI],
            aim_amplitude: 0.0,
            arc_halfwidth: None,
            horizon: 0.2,
            window: 0.02,
            steps: 4,
            nr: 16,
            nt: 64,
            touch_tol: 1e-3,
            time_tol: None,
            picard: PicardConfig {
                tol: 1e-7,
                rel_tol: 1e-7,
                compat_tol: 0.5,
                ..PicardConfig::default()
            },
            slot: SlotSpec {
                gap: 0.1,
                speed: 1.0,
                samples: 1024,
            },
        }
    }
}

fn number(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::Parse(format!("{key}: `{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(Error::Parse(format!("{key}: `{v}` is not finite")));
    }
    Ok(x)
}

fn count(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::Parse(format!("{key}: `{v}` is not a non-negative integer")))
}

fn pair(key: &str, v: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    match parts[..] {
        [a, b] => Ok([number(key, a)?, number(key, b)?]),
        _ => Err(Error::Parse(format!("{key}: expected two comma-separated numbers, got `{v}`"))),
    }
}

fn positive(what: &'static str, x: f64) -> Result<f64> {
    if x > 0.0 {
        Ok(x)
    } else {
        Err(Error::OutOfRange { what, value: x, range: "(0, ∞)" })
    }
}

impl ScenarioConfig {
    /// Reads and validates a config file; relative curve paths resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = Self::parse(&text, base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without the geometric check of [`ScenarioConfig::validate`].
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Parse(format!("line {}: duplicate key `{k}`", n + 1)));
            }
        }
        let mut cfg = ScenarioConfig::default();
        let mut disk = LogDisk { mu: 0.0, a: 0.6, b: 1.45 };
        let mut file = None;
        for (k, v) in &entries {
            let v = v.as_str();
            match k.as_str() {
                "mode" => {
                    cfg.mode = match v {
                        "solver" => RunMode::Solver,
                        "kinematic" => RunMode::Kinematic,
                        _ => return Err(Error::Parse(format!("mode: unknown `{v}`"))),
                    }
                }
                "domain" => {
                    if v == "logdisk" {
                        file = None;
                    } else if let Some(p) = v.strip_prefix("curve:") {
                        file = Some(base.join(p.trim()));
                    } else {
                        return Err(Error::Parse(format!("domain: unknown `{v}`")));
                    }
                }
                "mu" => disk.mu = number(k, v)?,
                "a" => disk.a = number(k, v)?,
                "b" => disk.b = number(k, v)?,
                "cut" => {
                    cfg.cut = if v == "principal" {
                        BranchCut::principal()
                    } else if let Some(angle) = v.strip_prefix("ray:") {
                        BranchCut::ray(number(k, angle.trim())?)
                    } else {
                        return Err(Error::Parse(format!("cut: unknown `{v}`")));
                    }
                }
                "eps" => cfg.eps = number(k, v)?,
                "direction" => cfg.direction = pair(k, v)?,
                "perturb" => {
                    cfg.perturb = match v {
                        "physical" => Perturbation::Physical,
                        "tilde" => Perturbation::Tilde,
                        _ => return Err(Error::Parse(format!("perturb: unknown `{v}`"))),
                    }
                }
                "stream_amplitude" => cfg.stream_amplitude = number(k, v)?,
                "stream_mode" => cfg.stream_mode = count(k, v)? as u32,
                "aim_arcs" => cfg.aim_arcs = pair(k, v)?,
                "aim_amplitude" => cfg.aim_amplitude = number(k, v)?,
                "arc_halfwidth" => cfg.arc_halfwidth = Some(count(k, v)?),
                "horizon" => cfg.horizon = number(k, v)?,
                "window" => cfg.window = number(k, v)?,
                "steps" => cfg.steps = count(k, v)?,
                "nr" => cfg.nr = count(k, v)?,
                "nt" => cfg.nt = count(k, v)?,
                "touch_tol" => cfg.touch_tol = number(k, v)?,
                "time_tol" => cfg.time_tol = Some(number(k, v)?),
                "picard_max_iter" => cfg.picard.max_iter = count(k, v)?,
                "picard_tol" => cfg.picard.tol = number(k, v)?,
                "picard_rel_tol" => cfg.picard.rel_tol = number(k, v)?,
                "picard_s" => cfg.picard.s = number(k, v)?,
                "compat_tol" => cfg.picard.compat_tol = number(k, v)?,
                "gap" => cfg.slot.gap = number(k, v)?,
                "speed" => cfg.slot.speed = number(k, v)?,
                "samples" => cfg.slot.samples = count(k, v)?,
                _ => return Err(Error::Parse(format!("unknown key `{k}`"))),
            }
        }
        cfg.source = match file {
            Some(p) => CurveSource::File(p),
            None => CurveSource::LogDisk(disk),
        };
        cfg.check_ranges()?;
        Ok(cfg)
    }

    fn check_ranges(&mut self) -> Result<()> {
        if !(self.eps >= 0.0) {
            return Err(Error::OutOfRange { what: "eps", value: self.eps, range: "[0, ∞)" });
        }
        let len = self.direction[0].hypot(self.direction[1]);
        if !(len > 0.0) {
            return Err(Error::InvalidInput("translation direction must be nonzero".into()));
        }
        self.direction = [self.direction[0] / len, self.direction[1] / len];
        positive("horizon", self.horizon)?;
        positive("window", self.window)?;
        positive("touch_tol", self.touch_tol)?;
        positive("gap", self.slot.gap)?;
        positive("speed", self.slot.speed)?;
        if let Some(t) = self.time_tol {
            positive("time_tol", t)?;
        }
        if self.steps == 0 {
            return Err(Error::OutOfRange { what: "steps", value: 0.0, range: "[1, ∞)" });
        }
        if self.slot.samples < 64 || self.slot.samples % 2 == 1 {
            return Err(Error::InvalidInput(format!("samples = {} must be even and at least 64", self.slot.samples)));
        }
        if self.slot.gap >= 1.0 {
            return Err(Error::OutOfRange { what: "gap", value: self.slot.gap, range: "(0, 1)" });
        }
        Ok(())
    }

    /// Output spacing: one step of a window, or of the horizon in kinematic mode.
    pub fn dt(&self) -> f64 {
        match self.mode {
            RunMode::Solver => self.window / self.steps as f64,
            RunMode::Kinematic => self.horizon / self.steps as f64,
        }
    }

    pub fn bisection_tol(&self) -> f64 {
        self.time_tol.unwrap_or(self.dt() / 10.0)
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        ScenarioConfig { eps, ..self.clone() }
    }

    /// Checks that the perturbed initial preimage is simple.
    pub fn validate(&self) -> Result<()> {
        super::scenario::initial_state(self).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_survive_an_empty_file() {
        let cfg = ScenarioConfig::parse("# nothing\n\n", Path::new(".")).unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
    }

    #[test]
    fn keys_are_parsed_and_direction_normalized() {
        let text = "mode = kinematic\neps = 1e-3\ndirection = 3, 4 # comment\ncut = ray:1.0\nnt=32\n";
        let cfg = ScenarioConfig::parse(text, Path::new(".")).unwrap();
        assert_eq!(cfg.mode, RunMode::Kinematic);
        assert_eq!(cfg.eps, 1e-3);
        assert!((cfg.direction[0] - 0.6).abs() < 1e-15 && (cfg.direction[1] - 0.8).abs() < 1e-15);
        assert_eq!(cfg.cut, BranchCut::ray(1.0));
        assert_eq!(cfg.nt, 32);
    }

    #[test]
    fn curve_paths_resolve_against_the_config_directory() {
        let cfg = ScenarioConfig::parse("domain = curve:shape.txt", Path::new("/data")).unwrap();
        assert_eq!(cfg.source, CurveSource::File(PathBuf::from("/data/shape.txt")));
    }

    #[test]
    fn malformed_files_are_parse_errors() {
        for text in ["nonsense", "eps = x", "eps = 1\neps = 2", "colour = red", "direction = 1", "mode = fast"] {
            assert!(matches!(ScenarioConfig::parse(text, Path::new(".")), Err(Error::Parse(_))), "{text}");
        }
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        assert!(ScenarioConfig::parse("eps = -1", Path::new(".")).is_err());
        assert!(ScenarioConfig::parse("window = 0", Path::new(".")).is_err());
        assert!(ScenarioConfig::parse("direction = 0,0", Path::new(".")).is_err());
        assert!(ScenarioConfig::parse("steps = 0", Path::new(".")).is_err());
    }
}
