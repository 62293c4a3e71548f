use thiserror::Error;

/// Errors raised by the simulation, diagnostics and exponent routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("negative concentration {value:e} in species {species} at cell {cell}")]
    Domain {
        species: usize,
        cell: usize,
        value: f64,
    },

    #[error("degenerate masses: {0}")]
    DegenerateMass(String),

    #[error(
        "positivity lost at t = {time}: species {species}, cell {cell}, value {value:e} \
         (after {halvings} dt halvings)"
    )]
    StepFailure {
        time: f64,
        species: usize,
        cell: usize,
        value: f64,
        halvings: u32,
    },

    #[error("linear solver did not converge: {iterations} iterations, relative residual {residual:e}")]
    SolverNonConvergence { iterations: usize, residual: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unsupported dimension N = {0} (need N >= 3)")]
    UnsupportedDimension(i64),

    #[error("below threshold: {0}")]
    BelowThreshold(String),

    #[error("divergent iteration: {0}")]
    Divergence(String),

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
