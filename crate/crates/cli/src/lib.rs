//! Command-line driver: configuration parsing, experiment dispatch and
//! result files.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{parse_config, ConfigError, Experiment, RunConfig};
pub use runner::{run_experiment, Check, Outcome};
