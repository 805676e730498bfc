use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("configuration parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("boundary projection did not converge for point ({x}, {y}) after {iterations} iterations")]
    Projection { x: f64, y: f64, iterations: usize },

    #[error("no interior point available to build a stencil for ghost point ({x}, {y})")]
    EmptyStencil { x: f64, y: f64 },

    #[error("linear solver `{solver}` did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    SolverDiverged {
        solver: String,
        residual: f64,
        iterations: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data in {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the user's input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::Parse(_)
                | Error::Mesh(_)
                | Error::UnknownStrategy { .. }
                | Error::Geometry(_)
        )
    }
}
