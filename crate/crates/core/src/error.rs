use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x}, {y}) lies on the branch cut")]
    PointOnCut { x: f64, y: f64 },
    #[error("frame requested at the singular point of the map (|z| = {radius:e})")]
    SingularPoint { radius: f64 },
    #[error("curve has {found} samples, at least {needed} required")]
    TooFewSamples { found: usize, needed: usize },
    #[error("tangent vanishes at sample {index} (|z_alpha| = {speed:e})")]
    DegenerateTangent { index: usize, speed: f64 },
    #[error("lambda = {lambda} outside the chart half-width {half_width}")]
    OutsideChart { lambda: f64, half_width: f64 },
    #[error("curve sample {index} is within {distance:e} of the singular point")]
    CurveHitsSingularity { index: usize, distance: f64 },
    #[error("blend width {blend} exceeds the chart half-width {half_width}")]
    ChartTooNarrow { blend: f64, half_width: f64 },
    #[error("designated point ({x}, {y}) is {distance:e} away from the boundary")]
    PointsNotOnBoundary { x: f64, y: f64, distance: f64 },
    #[error("{what}: linear solve failed ({detail})")]
    SolverDiverged { what: &'static str, detail: String },
    #[error("ill-posed discrete problem: {0}")]
    IllPosed(String),
    #[error("compatibility violated: {what} = {value:e} exceeds {tolerance:e}")]
    CompatibilityViolated {
        what: &'static str,
        value: f64,
        tolerance: f64,
    },
    #[error("flow map folds at node {node}, time index {step} (det = {det:e})")]
    FoldingDetected { node: usize, step: usize, det: f64 },
    #[error("no contraction: factor {factor:.4} > 1 for 3 consecutive iterations (last iteration {iteration})")]
    NoContraction { iteration: usize, factor: f64 },
    #[error("{what} = {value} out of range {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("resolution lost: {0}")]
    ResolutionLost(String),
    #[error("no touch detected up to t = {horizon}")]
    NoTouchWithinHorizon { horizon: f64 },
    #[error("domain checksum mismatch: expected {expected:016x}, found {found:016x}")]
    ChecksumMismatch { expected: u64, found: u64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
