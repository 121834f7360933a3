use thiserror::Error;

/// Errors raised by the modelling, generation and campaign layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid link: {0}")]
    InvalidLink(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("channel {index} is inactive in span {span}")]
    InactiveChannel { index: usize, span: usize },

    #[error("zero-dispersion singularity: effective beta2 = {beta2} ps^2/km")]
    ZeroDispersion { beta2: f64 },

    #[error("unreachable at one span: SNR {snr_db:.3} dB below threshold {threshold_db:.3} dB")]
    Unreachable { snr_db: f64, threshold_db: f64 },

    #[error("quadrature did not converge: estimate {estimate:e}, relative change {relative_change:.3e}")]
    NonConvergence { estimate: f64, relative_change: f64 },

    #[error("insufficient support: {0}")]
    InsufficientSupport(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numeric,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidLink(_)
            | Error::InvalidParameter(_)
            | Error::InactiveChannel { .. }
            | Error::Schema(_)
            | Error::Json(_) => ErrorClass::Validation,
            Error::ZeroDispersion { .. }
            | Error::Unreachable { .. }
            | Error::NonConvergence { .. }
            | Error::InsufficientSupport(_)
            | Error::Numeric(_) => ErrorClass::Numeric,
            Error::Io(_) => ErrorClass::Io,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
