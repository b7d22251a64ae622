use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid grid world spec: {0}")]
    InvalidGrid(String),

    #[error("invalid decision rule: {0}")]
    InvalidRule(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("formula parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("unsupported specification: {0}")]
    UnsupportedSpec(String),

    #[error("{what} did not converge after {iterations} sweeps (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("malformed explicit model: line {line}: {msg}")]
    Explicit { line: usize, msg: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("initial decision rule violates the property (probability {probability})")]
    UnsafeInitialRule { probability: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable snake-case name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "invalid_model",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidRule(_) => "invalid_rule",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::UnknownLabel(_) => "unknown_label",
            Error::Parse { .. } => "parse",
            Error::UnsupportedSpec(_) => "unsupported_spec",
            Error::NotConverged { .. } => "not_converged",
            Error::Explicit { .. } => "explicit_format",
            Error::Empty(_) => "empty",
            Error::UnsafeInitialRule { .. } => "unsafe_initial_rule",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }
}
