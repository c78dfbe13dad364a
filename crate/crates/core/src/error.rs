use thiserror::Error;

/// Errors surfaced by the sampling, estimation and oracle layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("{invalid} of {total} samples produced non-finite weights (cap is 0.1%)")]
    TooManyInvalidSamples { invalid: u64, total: u64 },

    #[error("operator 2h + m^2 is not non-negative: eigenvalue {eigenvalue:.6e} (increase m)")]
    NegativeShiftedSpectrum { eigenvalue: f64 },

    #[error("estimate is noise dominated: {0}")]
    NoiseDominated(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
