//! Scenario runner, detection scoring and benchmarks for the `glassnav`
//! binary.

pub mod bench;
pub mod commands;
pub mod config;
pub mod detect;
pub mod error;
pub mod run;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
