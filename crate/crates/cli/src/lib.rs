//! Command-line front end: experiment registry, config resolution and
//! output artifacts.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{ExperimentConfig, ExperimentId, Manifest, Overrides};
pub use error::{CliError, CliResult};
pub use experiments::{run, RunOutcome};
