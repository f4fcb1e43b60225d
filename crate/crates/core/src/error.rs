use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("measure is not stochastic (residual {residual:.3e})")]
    NotStochastic { residual: f64 },

    #[error("channel is not irreducible: {0}")]
    NotIrreducible(String),

    #[error("irreducibility criteria disagree: spectral={spectral}, positivity={positivity}")]
    Inconclusive { spectral: bool, positivity: bool },

    #[error("eigen-solver failure: {0}")]
    EigenSolver(String),

    #[error("no positive semidefinite eigenmatrix at the spectral radius")]
    NoPositiveEigenmatrix,

    #[error("dual Perron eigenmatrix is not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    SigmaNotPositive { min_eigenvalue: f64 },

    #[error("word enumeration budget exceeded: {words} words > {budget}")]
    BudgetExceeded { words: f64, budget: f64 },

    #[error("degenerate step: every atom has probability below 1e-14")]
    DegenerateStep,

    #[error("every sampled path is degenerate")]
    AllPathsDegenerate,

    #[error("insufficient samples: {found} < {required}")]
    InsufficientSamples { found: usize, required: usize },

    #[error("overflow in direct matrix product; reduce n_steps")]
    Overflow,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
