//! Experiment runner for the relaxation toolkit: presets for the three
//! reference experiments, a TOML config format, and CSV/JSON output.

pub mod args;
pub mod config;
pub mod error;
pub mod run;

pub use config::{ExperimentConfig, Overrides};
pub use error::CliError;
pub use run::{execute, run, write_outputs, EnvironmentResult};
