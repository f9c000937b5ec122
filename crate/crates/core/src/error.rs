use thiserror::Error;

/// Errors raised by the estimation and inference routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonobandError {
    #[error("degenerate boundary moments: c(t) = {value:e} at t = {t}")]
    DegenerateMoments { t: f64, value: f64 },

    /// `t` is NaN when the failure does not depend on the evaluation point.
    #[error("singular design{}: {reason}", at(.t))]
    SingularDesign { t: f64, reason: String },

    #[error("empty index domain: [{lo}, {hi}]")]
    EmptyDomain { lo: f64, hi: f64 },

    #[error("time {t} lies outside the domain [{lo}, {hi}]")]
    DomainViolation { t: f64, lo: f64, hi: f64 },

    #[error("invalid block length {len} for n = {n} (need 2 <= L <= n/2)")]
    InvalidWindow { len: usize, n: usize },

    #[error("weight row {row} has a vanishing normalizer")]
    EmptyWeightRow { row: usize },

    #[error("GCV denominator degenerate for every candidate bandwidth")]
    DegenerateGcv,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl MonobandError {
    /// True for failures of the numerical pipeline (as opposed to bad arguments).
    pub fn is_numerical(&self) -> bool {
        !matches!(self, MonobandError::InvalidInput(_) | MonobandError::InvalidWindow { .. })
    }
}

fn at(t: &f64) -> String {
    if t.is_nan() {
        String::new()
    } else {
        format!(" at t = {t}")
    }
}

pub type Result<T> = std::result::Result<T, MonobandError>;
