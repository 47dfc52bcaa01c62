//! Experiment runner for the quasistat library: configuration, ensembles,
//! subcommands and their output records.

pub mod commands;
pub mod config;
pub mod experiments;
pub mod record;

pub use config::{ExperimentConfig, Overrides};
pub use record::ResultRecord;
