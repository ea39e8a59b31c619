use thiserror::Error;

/// Errors produced by the discretization, the solver and the descent loop.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh needs at least one subdivision per side")]
    EmptyMesh,

    #[error("cell index {index} out of range for a mesh with {count} cells")]
    CellOutOfRange { index: usize, count: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("field lives on a mesh with n={found}, expected n={expected}")]
    MeshMismatch { expected: usize, found: usize },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("control value {value} on cell {cell} is outside the domain of the integrand")]
    Infeasible { cell: usize, value: f64 },

    #[error("integrand domain cannot be enumerated without a grid")]
    NonEnumerableDomain,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid value for `{key}`: {message}")]
    InvalidConfig { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
