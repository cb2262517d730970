use thiserror::Error;

/// Errors raised by the divergence, bound and sampling routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} must be finite and nonnegative, got {value}")]
    NegativeOrNonFinite { what: &'static str, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("vectors have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("empty vector")]
    Empty,

    #[error("reference entry q[{index}] = {value} must be strictly positive")]
    NonPositiveReference { index: usize, value: f64 },

    #[error("entry [{index}] = {value} is negative or non-finite")]
    InvalidEntry { index: usize, value: f64 },

    #[error("entries sum to {0}, expected 1")]
    NotNormalized(f64),

    #[error("{metric} value {value} is outside its range [0, {max}]")]
    OutOfRange {
        metric: &'static str,
        value: f64,
        max: f64,
    },

    #[error("generator is not a valid convex generator: {0}")]
    InvalidGenerator(String),

    #[error("quadrature did not converge: estimate {estimate}, error {error} after {intervals} intervals")]
    QuadratureNonConvergence {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("integrand is NaN at x = {0}")]
    NanIntegrand(f64),

    #[error("density ratio overflows at particle {index} (x = {particle}, log g = {log_ratio})")]
    WeightOverflow {
        index: usize,
        particle: f64,
        log_ratio: f64,
    },

    #[error("non-finite value {value} at sample {index} (x = {particle})")]
    NonFiniteSample {
        index: usize,
        particle: f64,
        value: f64,
    },

    #[error("all weights are zero")]
    ZeroMass,

    #[error("divergence is infinite; {0}")]
    InfiniteDivergence(&'static str),

    #[error("no sample size up to 2^63 satisfies the bound")]
    NoSampleSize,

    #[error("U_f(N, eps) decreases between N = {0} and N = {1}")]
    NonMonotoneBound(u64, u64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_nonnegative(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::NegativeOrNonFinite { what, value })
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}
