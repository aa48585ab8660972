//! Spectral-Galerkin simulation of a nonlocal Klausmeier plant-water model on
//! `Ω = [-L, L]` with nonlocal Dirichlet volume constraints, together with
//! checks of the energy estimates that bound its small-data solutions.

pub mod basis;
pub mod error;
pub mod kernel;
pub mod monitor;
pub mod nonlinear;
pub mod operators;
pub mod quadrature;
pub mod simulate;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
