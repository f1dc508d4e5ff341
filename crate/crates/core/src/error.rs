use alloc::string::String;

/// Errors raised by the rebiasing machinery.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid task `{id}`: {reason}")]
    InvalidTask { id: String, reason: &'static str },
    #[error("invalid prior: {0}")]
    InvalidPrior(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("quantile bracket could not be established after {doublings} doublings")]
    BracketFailure { doublings: u32 },
    #[error("empty input")]
    EmptyInput,
    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("input lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("NPMLE did not converge after {iterations} iterations (kkt_sup = {kkt_sup:e})")]
    NotConverged { iterations: usize, kkt_sup: f64 },
    #[error("predictor variance is zero; power tuning is undefined")]
    ZeroPredictorVariance,
    #[error("record `{id}` implies a non-positive variance")]
    NonPositiveVariance { id: String },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
