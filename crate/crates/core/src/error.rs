use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the in-memory pipeline (types, metrics, samplers, optimizer).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("all proposal weights of model `{model_id}` are zero")]
    AllZeroWeights { model_id: String },

    #[error("ensemble contains no models")]
    EmptyEnsemble,

    #[error("model `{model_id}` has no proposals")]
    EmptyModel { model_id: String },

    #[error("trajectory has no points")]
    EmptyTrajectory,

    #[error("candidate set is empty")]
    EmptyCandidateSet,

    #[error("non-finite coordinate at timestep {timestep}")]
    NonFiniteCoordinate { timestep: usize },

    #[error("invalid proposal weight {weight}: weights must be finite and nonnegative")]
    InvalidWeight { weight: f64 },

    #[error("inconsistent horizon: expected {expected} timesteps, found {found}")]
    InconsistentHorizon { expected: usize, found: usize },

    #[error("horizon mismatch: {left} vs {right} timesteps")]
    HorizonMismatch { left: usize, right: usize },

    #[error("k must be at least 1")]
    ZeroK,

    #[error("k = {k} exceeds candidate set size {size}")]
    KExceedsSetSize { k: usize, size: usize },

    #[error("k = {k} exceeds the {available} available proposals")]
    KExceedsProposals { k: usize, available: usize },

    #[error("k = {k} exceeds the {available} proposals with positive weight")]
    KExceedsPositiveSupport { k: usize, available: usize },

    #[error("scenario `{scenario_id}` has no ground truth")]
    MissingGroundTruth { scenario_id: String },

    #[error("{count} proposals exceed the exhaustive-search limit of {limit}")]
    TooManyProposals { count: usize, limit: usize },

    #[error("shape mismatch: expected {expected} values, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("invalid value for `{field}`: {message}")]
    InvalidConfig { field: String, message: String },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }
}
