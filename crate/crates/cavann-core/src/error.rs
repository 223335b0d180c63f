//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Invalid geometry, pose or parameter combination.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical routine failed to reach its accuracy target.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Gram matrix of the mode basis is too ill-conditioned to invert.
    #[error("synthesis error: Gram condition number {cond:.3e} exceeds limit {limit:.1e}")]
    IllConditioned { cond: f64, limit: f64 },

    /// All quantized inputs vanished; no interaction matrix can be recovered.
    #[error("degenerate program: sum of weighted mode matrices is zero")]
    DegenerateProgram,

    /// Pump strength would be imaginary for the requested detuning sign.
    #[error("sign error: {0}")]
    Sign(String),

    /// Candidate pool cannot supply a linearly independent basis.
    #[error("infeasible pool: {0}")]
    InfeasiblePool(String),

    /// Least-squares system does not determine all unknowns.
    #[error("reconstruction error: rank deficient, null-space dimension {null_dim}")]
    RankDeficient { null_dim: usize },

    /// Structurally invalid input (asymmetric matrix, bad pattern, ...).
    #[error("validation error: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
