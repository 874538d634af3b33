//! Field-history manifests and the norm report computed from them.
//!
//! ```text
//! manifest v1
//! shape = line:6.283185307179586     # or box:<n>:<side>, point
//! t_end = 0.01
//! s = 2.25                           # optional, default 2.25
//! checksum = 89ab...                 # optional FNV-1a of the frame values
//! frame = frames/0000.csv            # one per time level, in order
//! ```
//!
//! A frame file holds one row per sample with one comma-separated column per
//! component.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::norms::{parabolic_norm, History, NormKind, NormSpec, Shape};

use super::scenario::Timeline;

const HEADER: &str = "manifest v1";

#[derive(Debug, Clone, PartialEq)]
pub struct FieldManifest {
    pub shape: Shape,
    pub t_end: f64,
    pub s: f64,
    pub checksum: Option<u64>,
    pub frames: Vec<PathBuf>,
}

/// FNV-1a over the bit patterns of every value, frame by frame.
pub fn history_checksum(h: &History) -> u64 {
    let mut hash = 0xcbf29ce484222325_u64;
    for v in h.frames.iter().flatten().flatten() {
        for b in v.to_bits().to_le_bytes() {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(0x100000001b3);
        }
    }
    hash
}

fn shape_text(shape: Shape) -> String {
    match shape {
        Shape::Point => "point".into(),
        Shape::Line { period } => format!("line:{period}"),
        Shape::Box { n, length } => format!("box:{n}:{length}"),
    }
}

fn parse_number(what: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{what}: `{v}` is not a number")))
}

fn parse_shape(v: &str) -> Result<Shape> {
    let parts: Vec<&str> = v.split(':').collect();
    match parts[..] {
        ["point"] => Ok(Shape::Point),
        ["line", p] => Ok(Shape::Line { period: parse_number("shape period", p)? }),
        ["box", n, l] => Ok(Shape::Box {
            n: n.trim().parse().map_err(|_| Error::Parse(format!("shape: bad box size `{n}`")))?,
            length: parse_number("shape side", l)?,
        }),
        _ => Err(Error::Parse(format!("shape: unknown `{v}`"))),
    }
}

impl FieldManifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(HEADER) {
            return Err(Error::Parse(format!("manifest must start with `{HEADER}`")));
        }
        let (mut shape, mut t_end, mut s, mut checksum) = (None, None, 2.25, None);
        let mut frames = Vec::new();
        for raw in lines {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key = value, got `{line}`")))?;
            let v = v.trim();
            match k.trim() {
                "shape" => shape = Some(parse_shape(v)?),
                "t_end" => t_end = Some(parse_number("t_end", v)?),
                "s" => s = parse_number("s", v)?,
                "checksum" => {
                    checksum = Some(u64::from_str_radix(v, 16).map_err(|_| Error::Parse(format!("checksum: `{v}` is not hex")))?)
                }
                "frame" => frames.push(base.join(v)),
                other => return Err(Error::Parse(format!("unknown manifest key `{other}`"))),
            }
        }
        let shape = shape.ok_or_else(|| Error::Parse("manifest lacks `shape`".into()))?;
        let t_end = t_end.ok_or_else(|| Error::Parse("manifest lacks `t_end`".into()))?;
        if frames.is_empty() {
            return Err(Error::Parse("manifest lists no frames".into()));
        }
        Ok(FieldManifest { shape, t_end, s, checksum, frames })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Loads every frame, checking sizes and the checksum.
    pub fn load(&self) -> Result<History> {
        let frames = self.frames.iter().map(|p| read_frame(p)).collect::<Result<Vec<_>>>()?;
        let (nc, ns) = (frames[0].len(), frames[0].first().map_or(0, Vec::len));
        if nc == 0 || ns == 0 {
            return Err(Error::InvalidInput("empty frame".into()));
        }
        if let Some(k) = frames.iter().position(|f| f.len() != nc || f.iter().any(|c| c.len() != ns)) {
            return Err(Error::InvalidInput(format!("frame {k} differs in size from frame 0")));
        }
        let expected = match self.shape {
            Shape::Point => 1,
            Shape::Line { .. } => ns,
            Shape::Box { n, .. } => n * n,
        };
        if ns != expected {
            return Err(Error::InvalidInput(format!("{ns} samples per frame, shape needs {expected}")));
        }
        let history = History::new(self.shape, self.t_end, frames)?;
        if let Some(expected) = self.checksum {
            let found = history_checksum(&history);
            if found != expected {
                return Err(Error::ChecksumMismatch { expected, found });
            }
        }
        Ok(history)
    }
}

fn read_frame(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut comps: Vec<Vec<f64>> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|c| parse_number(&format!("{}:{}", path.display(), n + 1), c))
            .collect::<Result<_>>()?;
        if comps.is_empty() {
            comps = vec![Vec::new(); row.len()];
        }
        if row.len() != comps.len() {
            return Err(Error::Parse(format!("{}:{}: expected {} columns", path.display(), n + 1, comps.len())));
        }
        row.into_iter().zip(comps.iter_mut()).for_each(|(v, c)| c.push(v));
    }
    Ok(comps)
}

/// Writes `history` as `dir/manifest.txt` plus one CSV per frame.
pub fn write_manifest(dir: &Path, history: &History, s: f64) -> Result<PathBuf> {
    let frame_dir = dir.join("frames");
    fs::create_dir_all(&frame_dir)?;
    let mut m = format!(
        "{HEADER}\nshape = {}\nt_end = {}\ns = {s}\nchecksum = {:016x}\n",
        shape_text(history.shape),
        history.t_end,
        history_checksum(history)
    );
    for (k, frame) in history.frames.iter().enumerate() {
        let name = format!("frames/{k:04}.csv");
        let ns = frame.first().map_or(0, Vec::len);
        let mut body = String::new();
        for i in 0..ns {
            let row: Vec<String> = frame.iter().map(|c| format!("{}", c[i])).collect();
            body.push_str(&row.join(","));
            body.push('\n');
        }
        fs::write(dir.join(&name), body)?;
        let _ = writeln!(m, "frame = {name}");
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, m)?;
    Ok(path)
}

/// Boundary displacement `X(t) − X(0)` at the regular output times, one
/// component per coordinate, on a line of period 2π. `None` before a second
/// regular frame exists.
pub fn displacement_history(t: &Timeline) -> Option<History> {
    let regular = match t.transition {
        Some(_) => &t.entries[..t.entries.len().saturating_sub(1)],
        None => &t.entries[..],
    };
    let first = regular.first()?;
    let t_end = regular.last()?.time - first.time;
    if regular.len() < 2 || !(t_end > 0.0) {
        return None;
    }
    let frames = regular
        .iter()
        .map(|e| {
            let dx = e.curve.iter().zip(&first.curve).map(|(p, q)| p.x - q.x).collect();
            let dy = e.curve.iter().zip(&first.curve).map(|(p, q)| p.y - q.y).collect();
            vec![dx, dy]
        })
        .collect();
    History::new(Shape::Line { period: std::f64::consts::TAU }, t_end, frames).ok()
}

pub const REPORT_KINDS: [NormKind; 6] = [
    NormKind::Ht,
    NormKind::HbarHt,
    NormKind::F,
    NormKind::LinfQuarter,
    NormKind::SobolevSpatial,
    NormKind::SobolevTemporal,
];

pub fn kind_name(kind: NormKind) -> &'static str {
    match kind {
        NormKind::Ht => "ht",
        NormKind::HbarHt => "hbar_ht",
        NormKind::F => "f",
        NormKind::LinfQuarter => "linf_quarter",
        NormKind::SobolevSpatial => "sobolev_spatial",
        NormKind::SobolevTemporal => "sobolev_temporal",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    pub s: f64,
    pub rows: Vec<(NormKind, f64)>,
}

impl NormReport {
    pub fn compute(h: &History, s: f64) -> Self {
        let rows = REPORT_KINDS.iter().map(|&k| (k, parabolic_norm(h, &NormSpec::new(k, s)))).collect();
        NormReport { s, rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("norm,s,value\n");
        for (k, v) in &self.rows {
            let _ = writeln!(out, "{},{},{}", kind_name(*k), self.s, v);
        }
        out
    }
}
