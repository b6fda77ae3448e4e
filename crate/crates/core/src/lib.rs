//! Desk-scale laboratory for Hessian ascent on mixed spherical spin glasses.

pub mod ascent;
pub mod bernstein;
pub mod ensembles;
pub mod error;
pub mod hamiltonian;
pub mod hermite;
mod kernels;
pub mod mixture;
pub mod momentrep;
mod quad;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};

/// Library version, echoed in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
