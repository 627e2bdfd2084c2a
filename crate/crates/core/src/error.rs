use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or lengths that do not line up.
    #[error("structural error: {0}")]
    Structural(String),

    /// A parameter outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input data for which the requested quantity is undefined.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The requested path is not available at this problem size.
    #[error("capability limit: {0}")]
    Capability(String),

    #[error("iterative solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("recovery impossible: {0}")]
    RecoveryImpossible(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("verification failed: {0}")]
    Verification(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format { what, detail: detail.into() }
    }

    /// Process exit code for this error class.
    ///
    /// 1 usage/config, 2 data, 3 numerical/convergence, 4 verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Config(_) | Error::Capability(_) => 1,
            Error::Structural(_)
            | Error::Degenerate(_)
            | Error::Format { .. }
            | Error::Io { .. }
            | Error::Image { .. } => 2,
            Error::Convergence { .. } | Error::Singular(_) | Error::RecoveryImpossible(_) => 3,
            Error::Verification(_) => 4,
        }
    }
}
