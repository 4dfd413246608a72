use thiserror::Error;

/// Errors raised by model construction, detectors, and the simulation harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("subset class too large to enumerate: {members} members (limit {limit})")]
    Capacity { members: u128, limit: u128 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("renewal series did not converge for theta = {theta} after {terms} terms")]
    SeriesDivergence { theta: f64, terms: usize },

    #[error("root bracket failure: {0}")]
    Bracket(String),

    #[error("calibration failed: {0}")]
    Calibration(String),
}

pub type Result<T> = std::result::Result<T, Error>;
