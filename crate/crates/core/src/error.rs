use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value {value} at cell (i={i}, j={j})")]
    NonFinite { i: usize, j: usize, value: f64 },

    #[error("solution blew up at (i={i}, j={j}): |u| = {value:e}")]
    BlowUp { i: usize, j: usize, value: f64 },

    #[error("overflow evaluating {what}: exponent {exponent:e}")]
    Overflow { what: &'static str, exponent: f64 },

    #[error("negative heat-kernel mass {value:e} at t-index {i} (tolerance {tol:e})")]
    NegativeKernel { i: usize, value: f64, tol: f64 },

    #[error("semigroup evaluation failed ({attempted}): {reason}")]
    Semigroup { attempted: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no convergence after {iterations} iterations (marginal residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("regression at step {step} is rank deficient ({rank} of {features} features)")]
    RankDeficient { step: usize, rank: usize, features: usize },

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("replica {replica}: {source}")]
    Replica { replica: u32, source: Box<Error> },
}

impl Error {
    pub fn in_replica(self, replica: u32) -> Self {
        match self {
            Error::Replica { .. } => self,
            other => Error::Replica { replica, source: Box::new(other) },
        }
    }
}
