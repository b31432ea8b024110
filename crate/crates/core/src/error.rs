use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("COM-Poisson normalizer diverges (nu = 0 requires lambda < 1, got {lambda})")]
    Divergent { lambda: f64 },
    #[error("series not converged after {terms} terms (partial log-sum {ln_partial_sum})")]
    Truncation { terms: usize, ln_partial_sum: f64 },
    /// `trace` holds the log-likelihood after every accepted iteration.
    #[error("optimizer did not converge after {iterations} iterations")]
    Convergence { iterations: usize, trace: Vec<f64> },
    #[error("singular design or information matrix")]
    Rank,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("{0} stratum is empty")]
    EmptyStratum(&'static str),
    #[error("pooling needs at least two imputations, got {0}")]
    InsufficientImputations(usize),
    #[error("dataset is not complete; amputation needs every covariate observed")]
    Incomplete,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("generation failed: {0}")]
    Generation(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
