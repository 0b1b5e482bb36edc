//! Experiment harness for `sgd-theta`: TOML-configured CT and schlieren
//! comparisons, verification batteries, and small file tools.

pub mod commands;
pub mod config;

pub use commands::{cmd_check, run_experiment, CliError, ExperimentSummary, RunOptions};
pub use config::{ConfigError, ExperimentConfig};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
