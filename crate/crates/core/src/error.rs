use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    InvalidSpec { field: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "quadrature did not converge on [{lower}, {upper}]: error estimate {estimate:e} exceeds tolerance {tolerance:e} after {intervals} intervals"
    )]
    Quadrature {
        lower: f64,
        upper: f64,
        estimate: f64,
        tolerance: f64,
        intervals: usize,
    },

    #[error("step size too large: dt * rate = {product:e} exceeds bound {bound:e}")]
    Stability { product: f64, bound: f64 },

    #[error("jump rate overflow: {0}")]
    RateOverflow(String),

    #[error("positivity violated: minimum eigenvalue {min_eigenvalue:e} at step {step}")]
    Positivity { min_eigenvalue: f64, step: usize },

    #[error("fit failed: {0}")]
    Fit(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidSpec {
        field,
        reason: reason.into(),
    }
}
