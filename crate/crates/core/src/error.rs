use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The request exceeds a configured implementation limit.
    #[error("capability limit exceeded: {0}")]
    Capability(String),

    #[error("root finding failed on [{lo}, {hi}]: {reason}")]
    RootNotFound { lo: f64, hi: f64, reason: String },

    #[error("quadrature did not converge on [{a}, {b}] (error estimate {estimate:e})")]
    Quadrature { a: f64, b: f64, estimate: f64 },

    /// The coupled-mode system could not be factorized at this frequency.
    #[error("singular coupled-mode system at omega = {omega}")]
    Singular { omega: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema violation in {location}: {message}")]
    Schema { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
