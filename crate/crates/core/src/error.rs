use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: dimension mismatch, expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("process noise covariance is not positive semi-definite: eigenvalue {eigenvalue:e} (largest {largest:e})")]
    NonPsdProcessNoise { eigenvalue: f64, largest: f64 },

    #[error("{stage} covariance lost positive semi-definiteness: eigenvalue {eigenvalue:e} (largest {largest:e})")]
    CovarianceNotPsd {
        stage: &'static str,
        eigenvalue: f64,
        largest: f64,
    },

    #[error("innovation covariance is ill conditioned (condition estimate {condition:e})")]
    IllConditionedInnovation { condition: f64 },

    #[error("time update requested backwards in time: epoch {epoch} s, target {target} s")]
    BackwardsTime { epoch: f64, target: f64 },

    #[error("propagation failed: {0}")]
    Propagation(String),

    #[error("sliding window holds no usable records")]
    EmptyWindow,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid scenario: {0}")]
    Config(String),

    #[error("unknown technique `{0}`")]
    UnknownTechnique(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable category, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonPsdProcessNoise { .. } => "non_psd_process_noise",
            Error::CovarianceNotPsd { .. } => "covariance_not_psd",
            Error::IllConditionedInnovation { .. } => "ill_conditioned_innovation",
            Error::BackwardsTime { .. } => "backwards_time",
            Error::Propagation(_) => "propagation",
            Error::EmptyWindow => "empty_window",
            Error::InvalidInput(_) => "invalid_input",
            Error::Config(_) => "config",
            Error::UnknownTechnique(_) => "unknown_technique",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}
