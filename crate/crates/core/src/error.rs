use thiserror::Error;

/// Errors raised by samplers, evolution steps, functionals and tests.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("configuration is not summable at beta = {beta} (infinite tail weight)")]
    NotSummable { beta: f64 },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("all evolved weights underflowed to zero")]
    WeightsUnderflow,

    #[error("zero mass at index {0}")]
    ZeroMass(usize),

    #[error("unsupported increment law: {0}")]
    UnsupportedLaw(String),

    #[error("front profile stays below 1 everywhere (no leading edge)")]
    NoFrontCrossing,

    #[error("truncation too shallow: depth {depth} does not exceed support endpoint {support}")]
    TruncationTooShallow { depth: f64, support: f64 },

    #[error("too few points: need {needed}, have {have}")]
    TooFewPoints { needed: usize, have: usize },

    #[error("dimension mismatch: {left} columns vs {right} columns")]
    DimensionMismatch { left: usize, right: usize },

    #[error("sample too small: {have} rows, at least {needed} required")]
    SampleTooSmall { needed: usize, have: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
