//! Experiment runner: JSON configs in, CSV results and a manifest out.

pub mod config;
pub mod error;
pub mod output;
pub mod scenarios;
pub mod sweep;

pub use config::{ExperimentConfig, ScenarioId};
pub use error::{CliError, CliResult};
