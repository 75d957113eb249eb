//! Experiment runner for `glue-core`: run configs, sweeps over ε, CSV/JSON artifacts.

pub mod commands;
pub mod config;
pub mod error;
pub mod gridio;
pub mod report;

pub use commands::{run, run_with_threads, Command, RunOutput};
pub use config::{RunConfig, Scenario};
pub use error::{LabError, Result, Status};
