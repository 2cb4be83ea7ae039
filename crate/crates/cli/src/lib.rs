//! Library side of the `cspace` command: run configuration, checkpoints and
//! the command implementations.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;

pub use checkpoint::{Checkpoint, Manifest, Trained, CHECKPOINT_VERSION};
pub use config::{Architecture, Preset, RunConfig, Trainer};
pub use error::{CliError, CliResult};
