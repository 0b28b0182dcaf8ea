use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{0} is not symmetric positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("{0} is not symmetric positive semidefinite")]
    NotPsd(&'static str),

    #[error("selection weight {index} = {value} outside [0, 1]")]
    GammaRange { index: usize, value: f64 },

    #[error("no measurement supplied for selected sensor {0}")]
    MissingMeasurement(usize),

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("candidate set is empty")]
    EmptyCandidateSet,

    #[error("no candidate sensor can meet its QoS threshold alone at full power")]
    QosUnattainable,

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("subset enumeration supports at most {limit} sensors, got {got}")]
    TooManySensors { limit: usize, got: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
