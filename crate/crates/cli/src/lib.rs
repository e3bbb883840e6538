//! Experiment runner: TOML configs, checkpoints, CSV results, and run
//! manifests around the `diffchan-core` models.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod sampling;

pub use checkpoint::Checkpoint;
pub use config::ExperimentConfig;
pub use error::{CheckpointError, CliError, Result};
pub use run::{replay, run, CommandKind, Invocation};
