use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A buffer or basis would exceed the configured memory budget.
    #[error("sizing: {what} needs {requested} bytes, budget is {budget} bytes")]
    Sizing {
        what: &'static str,
        requested: u128,
        budget: u128,
    },

    /// An argument lies outside the domain of the operation.
    #[error("domain: {0}")]
    Domain(String),

    /// Two operands do not satisfy the operation's contract (mismatched
    /// lattices, aliased buffers, unnormalized input, ...).
    #[error("contract: {0}")]
    Contract(String),

    /// Support of a field reached the cube boundary during an operator
    /// application and truncation is configured as a hard error.
    #[error("truncation: support radius {radius} touches the boundary of half-width {half_width}")]
    Truncation { radius: usize, half_width: usize },

    /// A fit or ensemble computation could not be carried out.
    #[error("analysis: {0}")]
    Analysis(String),

    /// A persisted file does not conform to its schema.
    #[error("schema: {path}: {message}")]
    Schema { path: PathBuf, message: String },

    /// Invalid experiment configuration.
    #[error("config: {0}")]
    Config(String),

    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
