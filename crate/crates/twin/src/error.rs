use std::path::{Path, PathBuf};

/// Errors from the IO layer, the pipelines and the service.
#[derive(Debug, thiserror::Error)]
pub enum TwinError {
    #[error(transparent)]
    Core(#[from] twin_core::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing {what}: {} does not exist", path.display())]
    MissingArtifact { what: &'static str, path: PathBuf },

    #[error("cannot parse {}: {detail}", path.display())]
    Parse { path: PathBuf, detail: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Runtime(String),
}

impl TwinError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        TwinError::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(path: &Path, detail: impl ToString) -> Self {
        TwinError::Parse { path: path.to_path_buf(), detail: detail.to_string() }
    }

    /// 2 for problems with what the caller supplied, 1 for failures while
    /// running.
    pub fn exit_code(&self) -> i32 {
        match self {
            TwinError::Config(_) | TwinError::MissingArtifact { .. } | TwinError::Parse { .. } => 2,
            TwinError::Core(e) => match e {
                twin_core::Error::Config(_) | twin_core::Error::Contract(_) | twin_core::Error::Size { .. } => 2,
                _ => 1,
            },
            TwinError::Io { .. } | TwinError::Runtime(_) => 1,
        }
    }
}

pub type Result<T, E = TwinError> = std::result::Result<T, E>;
