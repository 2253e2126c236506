//! Experiment runner: configuration, training/evaluation/comparison
//! commands, interaction-log generation and ingestion, and delimited
//! exports of every reported quantity.

pub mod commands;
pub mod config;
pub mod error;
pub mod history;
pub mod logs;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
