use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] tsact_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{row}:{column}: {detail}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        detail: String,
    },

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Diverged { epoch: usize, batch: usize, detail: String },

    #[error("results are incomplete; missing cells: {}", .missing.join(", "))]
    Incomplete { missing: Vec<String> },

    #[error("{0}")]
    Check(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        use tsact_core::Error as C;
        match self {
            Error::Usage(_) => 2,
            Error::Core(C::Domain { .. } | C::Config(_)) => 2,
            Error::Io { .. } | Error::Parse { .. } | Error::Json { .. } | Error::Toml { .. } => 3,
            Error::Core(C::Data(_) | C::Unsupported(_) | C::Shape { .. } | C::Contract(_)) => 3,
            Error::Core(C::Numeric { .. }) | Error::Diverged { .. } => 4,
            Error::Incomplete { .. } => 5,
            Error::Check(_) => 1,
        }
    }
}
