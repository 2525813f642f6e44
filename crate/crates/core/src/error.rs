use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("point ({s}, {t}) lies outside the tabulated grid hull")]
    OutOfDomain { s: f64, t: f64 },

    #[error("accuracy budget exceeded in {context}: achieved {achieved:e}, requested {requested:e}")]
    Accuracy {
        context: String,
        achieved: f64,
        requested: f64,
    },

    #[error("lambda = {lambda} is a characteristic value (|D| = {abs_det:e})")]
    CharacteristicValue { lambda: Complex64, abs_det: f64 },

    #[error("unknown kernel family `{0}`")]
    UnknownKernel(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("orthonormal profile family deviates from identity by {deviation:e}")]
    NonOrthonormal { deviation: f64 },

    #[error("operation requires a Hermitian kernel")]
    NonHermitian,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("singular linear system")]
    Singular,

    #[error("missing series for plot: {0}")]
    MissingSeries(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
