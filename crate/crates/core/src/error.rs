use thiserror::Error;

/// Errors raised by the modeling engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("grid support {required:.4} UI exceeds the configured maximum of {limit:.4} UI")]
    SupportExceeded { required: f64, limit: f64 },

    #[error("input too short: {0}")]
    TooShort(String),

    #[error("search bracket [{lo}, {hi}] does not straddle the target")]
    BracketInvalid { lo: f64, hi: f64 },

    #[error("target unreachable: {0}")]
    TargetUnreachable(String),

    #[error("simulation overflow: {0}")]
    SimulationOverflow(String),

    #[error("empty result: {0}")]
    EmptyResult(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Rejects NaN, infinities and negative values.
pub(crate) fn check_non_negative(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(invalid(name, format!("must be finite, got {value}")));
    }
    if value < 0.0 {
        return Err(invalid(name, format!("must be >= 0, got {value}")));
    }
    Ok(())
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() || value <= 0.0 {
        return Err(invalid(
            name,
            format!("must be finite and > 0, got {value}"),
        ));
    }
    Ok(())
}
