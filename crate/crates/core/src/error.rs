use std::path::PathBuf;

/// Errors raised by the laboratory. Variants follow the failure classes the
/// command line maps onto exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported space: {0}")]
    UnsupportedSpace(String),

    #[error(
        "sinkhorn did not converge at eps={eps} after {iterations} iterations \
         (marginal error {marginal_error:.3e}, last value {last_value})"
    )]
    Convergence {
        eps: f64,
        iterations: usize,
        marginal_error: f64,
        last_value: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
