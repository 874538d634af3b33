//! Text format for sampled curves.
//!
//! ```text
//! curve v1 N=<count> period=6.283185307179586
//! <alpha> <x> <y>
//! ```

use std::io::{BufRead, Write};

use crate::conformal::PlanePoint;
use crate::error::{Error, Result};

use super::ClosedCurve;

/// Writes with 17 significant digits, which round-trips every `f64`.
pub fn write_curve<W: Write>(mut w: W, c: &ClosedCurve) -> Result<()> {
    let rows: Vec<[f64; 3]> = c
        .points()
        .iter()
        .enumerate()
        .map(|(k, p)| [c.param(k), p.x, p.y])
        .collect();
    write_samples(&mut w, c.period(), &rows)
}

pub fn write_samples<W: Write>(mut w: W, period: f64, rows: &[[f64; 3]]) -> Result<()> {
    writeln!(w, "curve v1 N={} period={:?}", rows.len(), period)?;
    for r in rows {
        writeln!(w, "{:.16e} {:.16e} {:.16e}", r[0], r[1], r[2])?;
    }
    Ok(())
}

/// Reads raw `(alpha, a, b)` rows and the period, checking the parameter grid
/// is uniform.
pub fn read_samples<R: BufRead>(r: R) -> Result<(f64, Vec<[f64; 3]>)> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty curve file".into()))??;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("curve") || fields.next() != Some("v1") {
        return Err(Error::Parse(format!("bad curve header `{header}`")));
    }
    let mut count = None;
    let mut period = None;
    for f in fields {
        match f.split_once('=') {
            Some(("N", v)) => count = Some(v.parse::<usize>().map_err(|e| Error::Parse(format!("N: {e}")))?),
            Some(("period", v)) => {
                period = Some(v.parse::<f64>().map_err(|e| Error::Parse(format!("period: {e}")))?)
            }
            _ => return Err(Error::Parse(format!("unknown header field `{f}`"))),
        }
    }
    let count = count.ok_or_else(|| Error::Parse("header lacks N".into()))?;
    let period = period.ok_or_else(|| Error::Parse("header lacks period".into()))?;
    let mut rows = Vec::with_capacity(count);
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
        if vals.len() != 3 {
            return Err(Error::Parse(format!("line {}: expected 3 columns", lineno + 2)));
        }
        rows.push([vals[0], vals[1], vals[2]]);
    }
    if rows.len() != count {
        return Err(Error::Parse(format!("header says N={count}, found {} rows", rows.len())));
    }
    for (k, row) in rows.iter().enumerate() {
        let expected = period * k as f64 / count as f64;
        if (row[0] - expected).abs() > 1e-9 * period {
            return Err(Error::Parse(format!("sample {k}: alpha {} is off the uniform grid", row[0])));
        }
    }
    Ok((period, rows))
}

pub fn read_curve<R: BufRead>(r: R) -> Result<ClosedCurve> {
    let (period, rows) = read_samples(r)?;
    ClosedCurve::new(rows.iter().map(|r| PlanePoint::new(r[1], r[2])).collect(), period)
}
