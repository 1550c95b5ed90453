use thiserror::Error;

/// Errors raised by the plate laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("energy density is indefinite (min eigenvalue {min_eigenvalue:e}) for kappa = {kappa}, epsilon = {epsilon}")]
    IndefiniteEnergy {
        kappa: f64,
        epsilon: f64,
        min_eigenvalue: f64,
    },

    #[error("singular system: {0}")]
    Singular(String),

    #[error(
        "iterative solver did not converge after {iterations} iterations (relative residual {residual:e})"
    )]
    NotConverged { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
