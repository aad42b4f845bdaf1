use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range for dimension {dim}")]
    Index { index: usize, dim: usize },

    /// A limit or rate check was asked to run without its assumptions.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("total spectral mass {mass} exceeds the bound {bound}")]
    MassBound { mass: f64, bound: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
