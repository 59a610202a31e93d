use thiserror::Error;

/// Errors raised by the solver, propagator and pulse utilities.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QbError {
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("adaptive integration failed at xi = {xi}: {reason}")]
    Integration { xi: f64, reason: &'static str },

    #[error("norm drifted by {drift:e} during propagation (limit {limit:e})")]
    NormDrift { drift: f64, limit: f64 },

    #[error("degenerate solution: {0}")]
    Degenerate(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, QbError>;

pub(crate) fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(QbError::NonFinite { what })
    }
}
