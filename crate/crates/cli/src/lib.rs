//! Experiment runner for `hopflab`: JSON configs in, CSV and JSON files out.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Command, RunOptions};
pub use config::{Experiment, ExperimentConfig};
pub use error::CliError;
pub use output::Output;
