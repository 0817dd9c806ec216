use thiserror::Error;

/// Errors raised by the relaxation toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error in `{field}`: {reason}")]
    Domain { field: &'static str, reason: String },

    /// The polar equations of motion are undefined at the origin unless θ = 0.
    #[error("singular state: r = 0 with sin(theta) = {sin_theta}")]
    SingularState { sin_theta: f64 },

    /// Numerical integration could not continue.
    #[error("integration failed at t = {last_good_time}: {reason}")]
    IntegrationFailure { last_good_time: f64, reason: String },

    /// The exact oracle is capped at a small number of particles.
    #[error("exact Lindblad evolution supports n <= {cap}, got n = {n}")]
    Resource { n: u32, cap: u32 },

    /// Arguments are structurally incompatible (e.g. mismatched time grids).
    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Domain {
        field,
        reason: reason.into(),
    }
}
