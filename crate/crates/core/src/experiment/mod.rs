//! Scenario runs, stability and convergence studies, and their plots.

pub mod config;
pub mod manifest;
pub mod plot;
pub mod scenario;
pub mod study;

pub use config::{CurveSource, Perturbation, RunMode, ScenarioConfig, SlotSpec};
pub use scenario::{evolve, initial_state, run_scenario, Frame, InitialState, Plane, ScenarioOutcome, Timeline, TimelineEntry, Transition, WindowReport};
pub use study::{convergence_study, loglog_fit, stability_study, ConvergenceStudy, StabilityRow, StabilityTable, StudyKind};
pub use plot::{emit_plots, PlotData};
pub use manifest::{displacement_history, history_checksum, write_manifest, FieldManifest, NormReport};
