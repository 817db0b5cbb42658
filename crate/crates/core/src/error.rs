use thiserror::Error;

/// Failure classes shared by every engine in the crate.
///
/// The CLI maps these onto process exit codes, so the variants are kept
/// coarse: callers that need detail read the message.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The request is valid but would exceed a configured size or memory guard.
    #[error("resource limit: {0}")]
    Resource(String),
    /// The requested engine cannot handle this configuration.
    #[error("capability error: {0}")]
    Capability(String),
    /// A numerical procedure failed (non-convergence, singular evaluation, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A pathwise solve left the configured state bound.
    #[error("divergence at t={time}: |x|={norm:e} exceeds bound; last finite state {last_state:?}")]
    Divergence {
        time: f64,
        norm: f64,
        last_state: Vec<f64>,
    },
    /// Input text could not be parsed.
    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
