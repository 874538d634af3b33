//! Deterministic SVG figures and the CSV tables behind them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::conformal::PlanePoint;
use crate::curve::PreimageKind;
use crate::error::{Error, Result};

use super::scenario::Timeline;
use super::study::{loglog_fit, ConvergenceStudy, StabilityTable};

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;

pub enum PlotData<'a> {
    Timeline(&'a Timeline),
    Study(&'a ConvergenceStudy),
    Stability(&'a StabilityTable),
}

fn case_label(c: PreimageKind) -> &'static str {
    match c {
        PreimageKind::CaseASimple => "A",
        PreimageKind::CaseBTouching => "B",
        PreimageKind::CaseCCrossing => "C",
    }
}

fn case_colour(c: PreimageKind) -> &'static str {
    match c {
        PreimageKind::CaseASimple => "#1f77b4",
        PreimageKind::CaseBTouching => "#d62728",
        PreimageKind::CaseCCrossing => "#7f7f7f",
    }
}

/// Axis-aligned data window mapped onto the plot area.
struct Figure {
    x: (f64, f64),
    y: (f64, f64),
    body: String,
    title: String,
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    padded(lo, hi)
}

impl Figure {
    fn new(title: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        Figure { x, y, body: String::new(), title: title.to_string() }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn polyline(&mut self, pts: &[(f64, f64)], colour: &str, closed: bool) {
        if pts.is_empty() {
            return;
        }
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect();
        let tag = if closed { "polygon" } else { "polyline" };
        let _ = writeln!(
            self.body,
            r#"<{tag} points="{}" fill="none" stroke="{colour}" stroke-width="1"/>"#,
            coords.join(" ")
        );
    }

    fn dot(&mut self, x: f64, y: f64, colour: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#,
            self.px(x),
            self.py(y)
        );
    }

    fn label(&mut self, x: f64, y: f64, text: &str) {
        let _ = writeln!(self.body, r#"<text x="{x:.2}" y="{y:.2}" font-size="12">{text}</text>"#);
    }

    fn finish(self, xlabel: &str, ylabel: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(s, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, r - l, b - t);
        let _ = writeln!(s, r#"<text x="{l}" y="{}" font-size="14">{}</text>"#, t - 16.0, self.title);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12">{xlabel}</text>"#, 0.5 * WIDTH - 20.0, HEIGHT - 12.0);
        let _ = writeln!(s, r#"<text x="8" y="{}" font-size="12">{ylabel}</text>"#, 0.5 * HEIGHT);
        for (v, x) in [(self.x.0, l), (self.x.1, r)] {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{}" font-size="10">{}</text>"#, x - 16.0, b + 14.0, tick(v));
        }
        for (v, y) in [(self.y.0, b), (self.y.1, t)] {
            let _ = writeln!(s, r#"<text x="4" y="{y:.2}" font-size="10">{}</text>"#, tick(v));
        }
        s.push_str(&self.body);
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    format!("{v:.3e}")
}

fn write(dir: &Path, name: &str, text: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text)?;
    out.push(path);
    Ok(())
}

pub fn timeline_csv(t: &Timeline) -> String {
    let mut s = String::from("time,case,approach,chord_arc,velocity_sup\n");
    for e in &t.entries {
        let _ = writeln!(s, "{},{},{},{},{}", e.time, case_label(e.case), e.approach, e.chord_arc, e.velocity_sup);
    }
    s
}

pub fn study_csv(st: &ConvergenceStudy) -> String {
    let mut s = String::from("h,error\n");
    for (h, e) in st.h.iter().zip(&st.errors) {
        let _ = writeln!(s, "{h},{e}");
    }
    s
}

pub fn stability_csv(t: &StabilityTable) -> String {
    let mut s = String::from("eps,distance,distance_over_eps\n");
    for r in &t.rows {
        let _ = writeln!(s, "{},{},{}", r.eps, r.distance, r.per_eps());
    }
    s
}

/// `(x, y)` columns of a two-or-more-column numeric CSV with a header.
pub fn read_xy_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines();
    lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut cols = l.split(',').map(|c| c.trim().parse::<f64>());
            match (cols.next(), cols.next()) {
                (Some(Ok(x)), Some(Ok(y))) => Ok((x, y)),
                _ => Err(Error::Parse(format!("bad CSV row `{l}`"))),
            }
        })
        .collect()
}

fn curves_svg(t: &Timeline) -> String {
    let pts = || t.entries.iter().flat_map(|e| e.curve.iter());
    let (x, y) = (bounds(pts().map(|p| p.x)), bounds(pts().map(|p| p.y)));
    // equal aspect
    let span = (x.1 - x.0).max(y.1 - y.0);
    let (cx, cy) = (0.5 * (x.0 + x.1), 0.5 * (y.0 + y.1));
    let mut fig = Figure::new("boundary snapshots (blue A, red B, grey C)", (cx - 0.5 * span, cx + 0.5 * span), (cy - 0.5 * span, cy + 0.5 * span));
    let stride = t.entries.len().div_ceil(12).max(1);
    let last = t.entries.len().saturating_sub(1);
    for (k, e) in t.entries.iter().enumerate() {
        if k % stride == 0 || k == last {
            let c: Vec<(f64, f64)> = e.curve.iter().map(|p: &PlanePoint| (p.x, p.y)).collect();
            fig.polyline(&c, case_colour(e.case), true);
        }
    }
    fig.finish("x", "y")
}

fn approach_svg(t: &Timeline) -> String {
    let x = bounds(t.entries.iter().map(|e| e.time));
    let y = bounds(t.entries.iter().map(|e| e.approach).chain(std::iter::once(0.0)).filter(|_| !t.entries.is_empty()));
    let mut fig = Figure::new("designated arc distance", x, y);
    let line: Vec<(f64, f64)> = t.entries.iter().map(|e| (e.time, e.approach)).collect();
    fig.polyline(&line, "black", false);
    for e in &t.entries {
        fig.dot(e.time, e.approach, case_colour(e.case));
    }
    if let Some(tr) = t.transition {
        let xs = fig.px(tr.t_star);
        fig.label(xs, MARGIN + 14.0, &format!("t* = {:.6e}", tr.t_star));
    }
    fig.finish("t", "distance")
}

/// Log-log scatter with the least-squares line and its slope.
fn loglog_svg(title: &str, xlabel: &str, ylabel: &str, xy: &[(f64, f64)]) -> String {
    let pos: Vec<(f64, f64)> = xy.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.log10(), y.log10())).collect();
    let mut fig = Figure::new(title, bounds(pos.iter().map(|p| p.0)), bounds(pos.iter().map(|p| p.1)));
    for &(x, y) in &pos {
        fig.dot(x, y, "#1f77b4");
    }
    if pos.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = xy.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).copied().unzip();
        let (slope, icpt) = loglog_fit(&xs, &ys);
        let ln10 = std::f64::consts::LN_10;
        let line: Vec<(f64, f64)> = [fig.x.0, fig.x.1].iter().map(|&lx| (lx, (icpt + slope * lx * ln10) / ln10)).collect();
        fig.polyline(&line, "#d62728", false);
        fig.label(MARGIN + 8.0, MARGIN + 16.0, &format!("slope {slope:.3}"));
    }
    fig.finish(&format!("log10 {xlabel}"), &format!("log10 {ylabel}"))
}

/// Writes the figures and their CSV under `dir`, returning the paths.
pub fn emit_plots(data: PlotData<'_>, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    match data {
        PlotData::Timeline(t) => {
            write(dir, "timeline.csv", &timeline_csv(t), &mut out)?;
            write(dir, "curves.svg", &curves_svg(t), &mut out)?;
            write(dir, "approach.svg", &approach_svg(t), &mut out)?;
        }
        PlotData::Study(s) => {
            write(dir, "convergence.csv", &study_csv(s), &mut out)?;
            let xy: Vec<(f64, f64)> = s.h.iter().copied().zip(s.errors.iter().copied()).collect();
            write(dir, "convergence.svg", &loglog_svg(&format!("{} refinement", s.kind), "h", "error", &xy), &mut out)?;
        }
        PlotData::Stability(t) => {
            write(dir, "stability.csv", &stability_csv(t), &mut out)?;
            let xy: Vec<(f64, f64)> = t.rows.iter().map(|r| (r.eps, r.distance)).collect();
            write(dir, "stability.svg", &loglog_svg("distance to the base run", "eps", "distance", &xy), &mut out)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::study::StudyKind;

    fn scratch(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("splash-plot-{}-{name}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        d
    }

    #[test]
    fn empty_timeline_gives_header_only_csv() {
        let t = Timeline { horizon: 1.0, entries: Vec::new(), transition: None };
        let dir = scratch("empty");
        emit_plots(PlotData::Timeline(&t), &dir).unwrap();
        assert_eq!(fs::read_to_string(dir.join("timeline.csv")).unwrap(), "time,case,approach,chord_arc,velocity_sup\n");
        let svg = fs::read_to_string(dir.join("approach.svg")).unwrap();
        assert!(svg.starts_with("<svg") && !svg.contains("<circle") && !svg.contains("<polyline"));
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn study_replots_from_its_csv() {
        let h = vec![0.2, 0.1, 0.05];
        let errors: Vec<f64> = h.iter().map(|x: &f64| 0.7 * x.powf(2.1)).collect();
        let s = ConvergenceStudy { kind: StudyKind::Poisson, order: loglog_fit(&h, &errors).0, h, errors };
        let dir = scratch("study");
        emit_plots(PlotData::Study(&s), &dir).unwrap();
        let xy = read_xy_csv(&fs::read_to_string(dir.join("convergence.csv")).unwrap()).unwrap();
        assert_eq!(xy.len(), 3);
        let (xs, ys): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        assert!((loglog_fit(&xs, &ys).0 - s.order).abs() < 1e-12);
        let svg = fs::read_to_string(dir.join("convergence.svg")).unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("slope 2.100"));
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn identical_inputs_give_identical_bytes() {
        let s = ConvergenceStudy { kind: StudyKind::StokesLinear, h: vec![0.3, 0.15, 0.075], errors: vec![1e-2, 2.6e-3, 6.4e-4], order: 2.0 };
        let (a, b) = (scratch("det-a"), scratch("det-b"));
        emit_plots(PlotData::Study(&s), &a).unwrap();
        emit_plots(PlotData::Study(&s), &b).unwrap();
        for f in ["convergence.csv", "convergence.svg"] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        }
        fs::remove_dir_all(a).unwrap();
        fs::remove_dir_all(b).unwrap();
    }

    #[test]
    fn malformed_csv_rows_are_rejected() {
        assert!(read_xy_csv("h,error\n0.1,x\n").is_err());
        assert!(read_xy_csv("").is_err());
    }
}
