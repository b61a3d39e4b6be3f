//! Configuration, seeded runs and the reproduction presets behind the `qxe`
//! command line tool.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod manifest;
pub mod presets;
pub mod seeds;

pub use config::ExperimentConfig;
pub use error::{Result, RunnerError};
pub use experiment::{run_experiment, RunOutcome};
