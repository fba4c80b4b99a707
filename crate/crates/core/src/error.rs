use thiserror::Error;

/// Errors raised by the rate model and its front ends.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A user-supplied parameter is outside its valid domain.
    #[error("invalid `{field}` = {value}: {reason}")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// A quantity is mathematically undefined for the given inputs
    /// (for example a segment that never succeeds).
    #[error("numerical domain error: {0}")]
    Domain(String),

    #[error("QPC shape with {photons} photons exceeds the combinatorial budget of {max}")]
    CombinatorialBudget { photons: u64, max: u64 },

    #[error("empty search range: {0}")]
    EmptyRange(String),

    #[error(
        "target skf > {target} not reached within squeezing bracket [{low_db}, {high_db}] dB \
         (skf at upper end = {skf_at_high})"
    )]
    ThresholdUnreachable {
        low_db: f64,
        high_db: f64,
        target: f64,
        skf_at_high: f64,
    },

    /// Malformed configuration document or axis specification.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by invalid configuration (as opposed to
    /// numerical-domain failures).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::Parse(_)
                | Error::EmptyRange(_)
                | Error::CombinatorialBudget { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(field: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            field,
            value,
            reason: "must lie in [0, 1]",
        })
    }
}

/// Failure probability of a per-slot process; must be strictly below one.
pub(crate) fn check_failure_probability(value: f64) -> Result<f64> {
    if value == 1.0 {
        return Err(Error::Domain(
            "failure probability q = 1: entanglement distribution never succeeds".into(),
        ));
    }
    if (0.0..1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            field: "q",
            value,
            reason: "must lie in [0, 1)",
        })
    }
}
