//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("integrand declared divergent: {0}")]
    DivergentIntegrand(String),
    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),
    #[error("kernel is singular at sigma = {0}")]
    SingularArgument(f64),
    #[error("no root bracket: {0}")]
    NoBracket(String),
    #[error("not in the self-similar regime: {0}")]
    NotSelfSimilarRegime(String),
    #[error("zero denominator in quotient")]
    ZeroDenominator,
    #[error("time step failed: {0}")]
    StepFailure(String),
    #[error("inner solver diverged: {0}")]
    InnerDivergence(String),
    #[error("oracle profile unavailable: {0}")]
    OracleUnavailable(String),
    #[error("constant search failed: {0}")]
    SearchFailure(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
