use crate::label::Label;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, GlmbError>;

#[derive(Debug, Error)]
pub enum GlmbError {
    #[error("density has no components with finite weight")]
    EmptyDensity,

    #[error("duplicate component (history {history:016x}, labels {labels})")]
    DuplicateComponent { history: u64, labels: String },

    #[error("invalid Gaussian mixture: {0}")]
    InvalidMixture(String),

    #[error("covariance is not positive definite even after jitter")]
    NotPositiveDefinite,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("hypervolume units differ ({0} vs {1})")]
    UnitMismatch(f64, f64),

    #[error("cubature did not reach tolerance within {evaluations} evaluations")]
    IntegrationFailure { evaluations: usize },

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("birth label {0} already present in the prior")]
    LabelClash(Label),

    #[error("oracle limits exceeded: {0}")]
    TooLarge(String),

    #[error("action space is empty")]
    NoActions,

    #[error("{failed} of {total} reward samples failed")]
    SampleFailures { failed: usize, total: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("experiment aborted: {0}")]
    ExperimentAborted(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
