use thiserror::Error;

/// Errors emitted by solvers, assembly and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: must satisfy {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("field role mismatch: expected {expected}, got {got}")]
    RoleMismatch { expected: &'static str, got: &'static str },

    #[error("field length {got} does not match dof count {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("nonzero value at constrained dof {dof}")]
    ConstrainedDofNonzero { dof: usize },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("no convergence after {iterations} iterations (last residual {last_residual:.3e})")]
    Convergence {
        iterations: usize,
        last_residual: f64,
        history: Vec<f64>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
