pub mod config;
pub mod run;
pub mod selftest;

pub use config::{ConfigError, ExperimentConfig, ModelKind};
pub use run::{run, write_report, Command, Outcome, RunError};
