use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    /// Every validation failure found in a resolved config.
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),

    #[error("dataset not found: {}", .0.display())]
    MissingDataset(PathBuf),

    #[error("checkpoint {}: format version {found}, this build reads {expected}", path.display())]
    CheckpointVersion { path: PathBuf, found: u32, expected: u32 },

    #[error("checkpoint {}: parameter blob holds {found} bytes, manifest declares {expected}", path.display())]
    CheckpointLength { path: PathBuf, expected: usize, found: usize },

    #[error("checkpoint {}: corrupt manifest: {reason}", path.display())]
    CheckpointManifest { path: PathBuf, reason: String },

    #[error("incompatible inputs: {0}")]
    Mismatch(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] cspace::Error),
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }

    /// Process exit code by error category.
    pub fn exit_code(&self) -> i32 {
        use cspace::Error as E;
        match self {
            CliError::Config(_) | CliError::Invalid(_) => 2,
            CliError::MissingDataset(_) | CliError::Io { .. } => 3,
            CliError::CheckpointVersion { .. }
            | CliError::CheckpointLength { .. }
            | CliError::CheckpointManifest { .. } => 4,
            CliError::Mismatch(_) => 5,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) => 2,
                E::Io(_) | E::BadMagic { .. } | E::Truncated { .. } | E::CountMismatch { .. } | E::Format(_) => 3,
                E::DimensionMismatch { .. } | E::Shape(_) => 5,
                E::NonFinite(_) => 6,
            },
        }
    }
}
