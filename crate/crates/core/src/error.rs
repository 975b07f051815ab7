use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HerdError {
    #[error("validation failed for {coefficient}: {detail}")]
    Validation { coefficient: String, detail: String },
    #[error("{coefficient} is not finite at input {point:?}")]
    NonFinite { coefficient: String, point: Vec<f64> },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("index {index} out of range for {len} items")]
    Index { index: usize, len: usize },
    #[error("coefficient {0} produced a non-finite value")]
    Coefficient(String),
    #[error("size mismatch: {left} vs {right} points")]
    Size { left: usize, right: usize },
    #[error("exact assignment of {n} points exceeds the cap of {cap}; subsample both clouds")]
    Capacity { n: usize, cap: usize },
    #[error("state became non-finite at step {step} (t = {time})")]
    Blowup { step: usize, time: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("log-log fit failed: {0}")]
    Fit(String),
    #[error("observable {0} is not bounded on the samples")]
    Observable(String),
    #[error("common-noise increments are required while the common noise is active")]
    MissingNoise,
    #[error("{failed} of {total} replicas failed")]
    Evaluation { failed: usize, total: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("scenario error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, HerdError>;

impl HerdError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        HerdError::InvalidParameter(msg.into())
    }

    /// Short machine-readable tag used in run manifests.
    pub fn kind(&self) -> &'static str {
        match self {
            HerdError::Validation { .. } => "validation",
            HerdError::NonFinite { .. } => "non_finite",
            HerdError::Dimension { .. } => "dimension",
            HerdError::Index { .. } => "index",
            HerdError::Coefficient(_) => "coefficient",
            HerdError::Size { .. } => "size",
            HerdError::Capacity { .. } => "capacity",
            HerdError::Blowup { .. } => "blowup",
            HerdError::Unsupported(_) => "unsupported",
            HerdError::Fit(_) => "fit",
            HerdError::Observable(_) => "observable",
            HerdError::MissingNoise => "missing_noise",
            HerdError::Evaluation { .. } => "evaluation",
            HerdError::InvalidParameter(_) => "invalid_parameter",
            HerdError::Parse { .. } => "parse",
            HerdError::Io { .. } => "io",
        }
    }

    /// Process exit status: 2 validation, 3 runtime blowup, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HerdError::Io { .. } => 4,
            HerdError::Blowup { .. } | HerdError::Evaluation { .. } => 3,
            _ => 2,
        }
    }
}
