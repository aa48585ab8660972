use thiserror::Error;

use crate::simulate::GalerkinState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid quadrature rule: {0}")]
    InvalidQuadrature(&'static str),
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("basis index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("{0} has no closed differentiation map")]
    NoDerivativeMap(&'static str),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("initial profile {field} violates its boundary constraint: |value| = {value:e} at x = {x}")]
    BoundaryViolation { field: &'static str, x: f64, value: f64 },
    #[error("integration aborted at t = {t}: {reason}")]
    IntegrationAborted { t: f64, reason: String, last_valid: Box<GalerkinState> },
    #[error("singular Gram matrix")]
    SingularGram,
}
