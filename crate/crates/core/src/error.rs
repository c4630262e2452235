use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: required column `{column}` not found in header")]
    Schema { column: String },

    #[error("range error: {0}")]
    Range(String),

    #[error("coding error: {0}")]
    Coding(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("model specification error: {0}")]
    Spec(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (gradient max-norm {gradient_norm:e})")]
    Convergence {
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("initialization error: {0}")]
    Initialization(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("artifact error: {0}")]
    Artifact(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
