//! Scenario runner: parses a flat config, runs one scenario and writes CSV
//! output plus a JSON summary of the checks it performed.

pub mod config;
pub mod run;

pub use config::{parse_config, parse_config_for, ConfigError, RunConfig, Scenario};
pub use run::{input_digest, run, Check, RunSummary};
