//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by estimation, inference, sampling, and the CLI front end.
#[derive(Debug, Error)]
pub enum ElwError {
    /// The input data violate a sample invariant (empty observed set,
    /// probabilities out of range, mismatched lengths, ...).
    #[error("invalid sample: {0}")]
    InvalidSample(String),

    /// A function was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An inverse-probability weight is undefined.
    #[error("division by zero: unit {unit} has selection probability 0")]
    DivisionByZero { unit: usize },

    /// The profiled likelihood has no interior maximum (for example all
    /// observed probabilities equal 1 while some units are missing).
    #[error("degenerate likelihood: {0}")]
    DegenerateLikelihood(String),

    /// A variance estimator's denominator guard failed.
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    /// Trimming removed every unit from a retained set that must be non-empty.
    #[error("empty retained set: {0}")]
    EmptyRetainedSet(String),

    /// Complete or quasi-complete separation in the logistic fit.
    #[error("separation detected in logistic fit (|beta| = {beta_norm:.3e}, |grad| = {grad_norm:.3e})")]
    Separation { beta_norm: f64, grad_norm: f64 },

    /// A required matrix factorization failed.
    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// An iterative procedure did not converge within its iteration budget.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// Too many resampling replicates were degenerate.
    #[error("resampling failed: {discarded} degenerate replicates exceeded the retry budget of {budget}")]
    ResamplingFailed { discarded: usize, budget: usize },

    /// A user-supplied configuration or request is inconsistent.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl ElwError {
    /// Process exit code for the CLI: 1 for usage problems, 2 for numerical
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ElwError::InvalidConfig(_) | ElwError::Io(_) | ElwError::Csv(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, ElwError>;
