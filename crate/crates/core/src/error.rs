use thiserror::Error;

/// Failures raised by the numerical engines.
///
/// The variants map onto the CLI exit codes: validation and configuration
/// problems are user errors, accuracy and budget problems are numerical,
/// fit problems come from the analysis layer.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("validation failed for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge ({context}): previous {previous:e}, current {current:e}")]
    Accuracy {
        context: String,
        previous: f64,
        current: f64,
    },

    #[error("evaluation budget exceeded: {0}")]
    Budget(String),

    #[error("indeterminate frequency: oscillation amplitude {amplitude:e} below 10x noise floor {noise_floor:e}")]
    IndeterminateFrequency { amplitude: f64, noise_floor: f64 },

    #[error("fit failed: {0}")]
    FitFailed(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::validation(field, message)
}
