use thiserror::Error;

/// Errors raised by game validation, the numerical operators and the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("payoff {value} at {location} is outside [-1, 1]")]
    PayoffOutOfRange { location: String, value: f64 },

    #[error("payoffs are not zero-sum: max |R1 + R2^T| = {residual:e} at {location}")]
    NotZeroSum { location: String, residual: f64 },

    #[error("transition row at {location} is not a distribution (sum {sum}, min {min})")]
    BadTransitionRow {
        location: String,
        sum: f64,
        min: f64,
    },

    #[error("discount {0} is not in the open interval (0, 1)")]
    BadDiscount(f64),

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("not a probability distribution: {0}")]
    NotADistribution(String),

    #[error("exploration bound for a stochastic-game variant requires a discount factor")]
    MissingGamma,

    #[error("induced Markov chain is not ergodic: {0}")]
    NotErgodic(String),

    #[error(
        "fixed-point iteration did not converge after {iters} iterations (residual {residual:e})"
    )]
    NoConvergence { iters: usize, residual: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("record grids differ: {0}")]
    GridMismatch(String),

    #[error("series has non-positive value {value} at index {index}")]
    NonPositiveValues { index: u64, value: f64 },

    #[error("output already exists: {0} (pass --force to overwrite)")]
    OutputExists(String),

    #[error("linear program failed: {0}")]
    Solver(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
