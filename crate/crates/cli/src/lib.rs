//! Experiment runner for `nelsonbath-core`: strict JSON configs, seeded runs,
//! CSV/JSON tables and the `selftest` identity suite.

pub mod config;
pub mod output;
pub mod runner;
pub mod selftest;

pub use config::{parse_config, ConfigError, RunConfig, Subcommand, DEFAULT_SEED};
pub use output::{emit, Format, Metadata, Table, Value};
pub use runner::{execute, run, Report, RunError};
