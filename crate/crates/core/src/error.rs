use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a model precondition. `field` names the offending input.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("operation requires a {expected} model, got {actual}")]
    WrongModel {
        expected: &'static str,
        actual: &'static str,
    },

    #[error(
        "boundary overflow at t = {t}: population {population:.3e} on the outer ladder sites exceeds tolerance {tolerance:.3e}"
    )]
    BoundaryOverflow {
        t: f64,
        population: f64,
        tolerance: f64,
    },

    #[error("integration became unstable at t = {t}: {what} is not finite")]
    StepInstability { t: f64, what: &'static str },

    #[error("positivity violated at t = {t}: minimum eigenvalue {min_eigenvalue:.3e}")]
    PositivityViolation { t: f64, min_eigenvalue: f64 },

    #[error("work rate has imaginary residual {residual:.3e}")]
    NonRealWorkRate { residual: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code for this error class. Stable across all CLI commands.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. } | Error::Config(_) | Error::WrongModel { .. } => {
                crate::harness::EXIT_VALIDATION
            }
            Error::BoundaryOverflow { .. } => crate::harness::EXIT_BOUNDARY,
            Error::StepInstability { .. }
            | Error::PositivityViolation { .. }
            | Error::NonRealWorkRate { .. } => crate::harness::EXIT_INSTABILITY,
            Error::DimensionMismatch { .. } | Error::InsufficientData(_) => {
                crate::harness::EXIT_INTERNAL
            }
            Error::Io(_) | Error::Json(_) => crate::harness::EXIT_IO,
        }
    }
}
