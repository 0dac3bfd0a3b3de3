use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its admissible range. `field` names the offender.
    #[error("invalid {field}: {message}")]
    InvalidParam {
        field: &'static str,
        message: String,
    },

    /// An argument left the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A bracketed root search found no sign change.
    #[error("no sign change on ({lo:.6e}, {hi:.6e}): f(lo)={f_lo:.6e}, f(hi)={f_hi:.6e}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// Every candidate privacy level left the collector without participants.
    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    /// Malformed roster or data CSV.
    #[error("csv error at line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParam {
            field,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
