use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its allowed range.
    #[error("configuration error: {0}")]
    Config(String),

    /// Shapes or indices do not fit together.
    #[error("structural error: {0}")]
    Structure(String),

    /// A caller broke an operation's precondition.
    #[error("contract error: {0}")]
    Contract(String),

    /// A non-finite value appeared in a computation.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("singular point: cos(phi) = {cos_phi:e} at phi = {phi}")]
    Singularity { phi: f64, cos_phi: f64 },

    /// The time integration blew up.
    #[error("instability at step {step} (t = {time}): {reason}")]
    Instability {
        step: usize,
        time: f64,
        reason: String,
    },

    #[error("degenerate reference: {0}")]
    DegenerateReference(String),

    #[error("{}:{line}: {msg}", path.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "<input>".into()))]
    Parse {
        path: Option<PathBuf>,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: None,
            line,
            msg: msg.into(),
        }
    }
}
