//! Configuration, data generation and experiment orchestration behind the `dquant` binary.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;

pub use config::{load_config, ExperimentConfig, ResolvedExperiment};
pub use data::{generate_data, DataSpec};
pub use error::{CliError, Result};
pub use experiment::{run_experiment, Command, RunSummary};
