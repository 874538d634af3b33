//! Free-boundary Navier–Stokes splash simulation on a desingularized domain.

pub mod conformal;
pub mod curve;
pub mod elliptic;
pub mod experiment;
pub mod error;
pub mod fixedpoint;
pub mod grid;
pub mod initdata;
pub mod linalg;
pub mod norms;
pub mod spectral;
pub mod stokes;

pub use error::{Error, Result};
