//! `splash-sim`: splash scenarios, stability and convergence studies, curve
//! checks and norm reports. Exit code 0 on success, 2 on scenario errors,
//! 3 on I/O errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use splash_core::curve::io::read_curve;
use splash_core::curve::{chord_arc_constant, classify_polyline, classify_preimage, PreimageKind};
use splash_core::error::{Error, Result};
use splash_core::experiment::plot::stability_csv;
use splash_core::experiment::{
    convergence_study, displacement_history, emit_plots, run_scenario, stability_study, write_manifest, FieldManifest,
    NormReport, PlotData, ScenarioConfig, StudyKind, WindowReport,
};

#[derive(Parser)]
#[command(name = "splash-sim", version, about = "Splash formation simulator and verification studies")]
struct Cli {
    /// Directory receiving every output file.
    #[arg(long, global = true, default_value = "splash-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CurvePlane {
    /// Classify the square of the curve.
    Tilde,
    /// Classify the curve as given.
    Physical,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a scenario to the first touch or the horizon.
    Simulate { config: PathBuf },
    /// Classify a sampled curve.
    CheckCurve {
        curve: PathBuf,
        #[arg(long, value_enum, default_value = "tilde")]
        plane: CurvePlane,
        #[arg(long, default_value_t = 1e-3)]
        touch_tol: f64,
    },
    /// Distance between the base run and ε-translated runs.
    Stability {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        eps: Vec<f64>,
    },
    /// Refinement study: poisson, stokes_linear or picard.
    Converge {
        kind: StudyKind,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Norm report of a field-history manifest.
    Norms {
        manifest: PathBuf,
        /// Overrides the manifest's regularity index.
        #[arg(long)]
        s: Option<f64>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        _ => 2,
    }
}

fn case_name(c: PreimageKind) -> &'static str {
    match c {
        PreimageKind::CaseASimple => "A (simple)",
        PreimageKind::CaseBTouching => "B (touching)",
        PreimageKind::CaseCCrossing => "C (crossing)",
    }
}

fn windows_csv(windows: &[WindowReport]) -> String {
    let mut s = String::from("start,length,iterations,max_factor,final_difference\n");
    for w in windows {
        let _ = writeln!(s, "{},{},{},{},{}", w.start, w.length, w.iterations, w.max_factor, w.final_difference);
    }
    s
}

fn simulate(config: &Path, out: &Path) -> Result<String> {
    let cfg = ScenarioConfig::load(config)?;
    let outcome = run_scenario(&cfg)?;
    fs::create_dir_all(out)?;
    let tl = &outcome.timeline;
    emit_plots(PlotData::Timeline(tl), out)?;
    fs::write(out.join("windows.csv"), windows_csv(&outcome.windows))?;
    if let Some(h) = displacement_history(tl) {
        write_manifest(&out.join("displacement"), &h, cfg.picard.s)?;
    }
    let mut s = String::new();
    let _ = writeln!(s, "frames: {}", tl.entries.len());
    let _ = writeln!(s, "windows: {}", outcome.windows.len());
    if let Some(e) = tl.entries.first() {
        let _ = writeln!(s, "initial approach: {:.6e}", e.approach);
    }
    let _ = writeln!(s, "approach violations: {}", tl.approach_violations());
    match tl.transition {
        Some(t) => {
            let _ = writeln!(s, "t*: {:.9e} in [{:.9e}, {:.9e}], case {}", t.t_star, t.bracket.0, t.bracket.1, case_name(t.case));
        }
        None => {
            let _ = writeln!(s, "no touch up to t = {}", tl.horizon);
        }
    }
    fs::write(out.join("summary.txt"), &s)?;
    tl.t_star()?;
    Ok(s)
}

fn check_curve(path: &Path, plane: CurvePlane, touch_tol: f64, out: &Path) -> Result<String> {
    let file = fs::File::open(path)?;
    let curve = read_curve(std::io::BufReader::new(file))?;
    let case = match plane {
        CurvePlane::Tilde => classify_preimage(&curve, touch_tol)?,
        CurvePlane::Physical => classify_polyline(&curve, touch_tol)?,
    };
    let mut s = String::new();
    let _ = writeln!(s, "samples: {}", curve.len());
    let _ = writeln!(s, "chord-arc constant: {:.6e}", chord_arc_constant(&curve));
    let _ = writeln!(s, "case: {}", case_name(case.case));
    if let Some(d) = case.min_distance {
        let _ = writeln!(s, "closest approach: {d:.6e}");
    }
    for (a, b) in &case.witnesses {
        let _ = writeln!(s, "witness: {a:.9} {b:.9}");
    }
    fs::create_dir_all(out)?;
    fs::write(out.join("check.txt"), &s)?;
    Ok(s)
}

fn stability(config: &Path, eps: &[f64], out: &Path) -> Result<String> {
    let cfg = ScenarioConfig::load(config)?;
    let table = stability_study(&cfg, eps)?;
    fs::create_dir_all(out)?;
    emit_plots(PlotData::Stability(&table), out)?;
    let mut s = stability_csv(&table);
    for (a, b, r) in table.pairwise_ratios() {
        let _ = writeln!(s, "# ratio d({b})/d({a}) = {r:.6}");
    }
    Ok(s)
}

fn converge(kind: StudyKind, levels: usize, out: &Path) -> Result<String> {
    let study = convergence_study(kind, levels)?;
    fs::create_dir_all(out)?;
    emit_plots(PlotData::Study(&study), out)?;
    let mut s = String::from("h,error\n");
    for (h, e) in study.h.iter().zip(&study.errors) {
        let _ = writeln!(s, "{h},{e}");
    }
    let _ = writeln!(s, "# {kind} observed order {:.4}", study.order);
    Ok(s)
}

fn norms(manifest: &Path, s: Option<f64>, out: &Path) -> Result<String> {
    let m = FieldManifest::read(manifest)?;
    let history = m.load()?;
    let report = NormReport::compute(&history, s.unwrap_or(m.s));
    let csv = report.to_csv();
    fs::create_dir_all(out)?;
    fs::write(out.join("norms.csv"), &csv)?;
    Ok(csv)
}

fn run(cli: Cli) -> Result<String> {
    let out = cli.out.as_path();
    match cli.command {
        Command::Simulate { config } => simulate(&config, out),
        Command::CheckCurve { curve, plane, touch_tol } => check_curve(&curve, plane, touch_tol, out),
        Command::Stability { config, eps } => stability(&config, &eps, out),
        Command::Converge { kind, levels } => converge(kind, levels, out),
        Command::Norms { manifest, s } => norms(&manifest, s, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("splash-sim: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
