//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, QcError>;

#[derive(Debug, Error)]
pub enum QcError {
    #[error("invalid Fock dimension {dim}: need dim >= 2")]
    InvalidDimension { dim: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("operator dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not Hermitian (residue {residue:.3e})")]
    NotHermitian { residue: f64 },

    #[error("displacement amplitude |alpha| = {alpha_abs:.3} exceeds maximum {max:.3}")]
    DisplacementTooLarge { alpha_abs: f64, max: f64 },

    #[error("truncated displacement lost unitarity (residue {residue:.3e} > {tol:.3e}); increase dim or reduce |alpha|")]
    TruncationError { residue: f64, tol: f64 },

    #[error("integrator step {step} failed: {reason}")]
    StepFailure { step: usize, reason: String },

    #[error("classical trajectory escaped (|q| = {q_abs:.3} > {bound:.3}) at step {step}")]
    Blowup { step: usize, q_abs: f64, bound: f64 },

    #[error("particle ensemble degenerated at step {step}: all weights underflowed")]
    DegenerateEnsemble { step: usize },

    #[error("trace dt {trace_dt} does not match configured dt {config_dt}")]
    DtMismatch { trace_dt: f64, config_dt: f64 },

    #[error("model count mismatch: {expected} candidates, {got} increments")]
    ModelCountMismatch { expected: usize, got: usize },

    #[error("trace file format error: {0}")]
    TraceFormat(String),

    #[error("duplicate trial seed {seed}; change base_seed")]
    SeedCollision { seed: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
