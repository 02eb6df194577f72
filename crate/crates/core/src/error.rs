//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the supex library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A document failed structural validation; `path` points at the offending node.
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    /// A field specification violates one of its structural conditions.
    #[error("validation error: {0}")]
    Validation(String),

    /// Covariance factorization failed even after the jitter escalation budget.
    #[error(
        "factorization failed: jitter escalated to {max_jitter:.1e} without success; \
         smallest eigenvalue estimate {min_eigenvalue:.3e}"
    )]
    Factorization { max_jitter: f64, min_eigenvalue: f64 },

    /// The circulant embedding spectrum is negative beyond tolerance.
    #[error(
        "circulant embedding failed: eigenvalue {min_eigenvalue:.3e} below tolerance \
         {tolerance:.3e}; fall back to dense factorization"
    )]
    Embedding { min_eigenvalue: f64, tolerance: f64 },

    /// Adaptive quadrature did not reach the requested relative tolerance.
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
