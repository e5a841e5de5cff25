//! Risk-sensitive performance analysis of open quantum harmonic oscillators.

pub mod error;
pub mod matfun;
pub mod par;

pub use error::{Error, Result};
pub mod fixtures;
pub mod model;
pub mod random;
pub mod gaussian;
pub mod quartic;
pub mod cumulants;
pub mod large_dev;
pub mod classical;

/// Crate version recorded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
