//! Experiment runner for sleep-wake scheduling: JSON configs, CSV/TSV
//! output, parallel seeded sweeps and the `sleepwake` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod run;
pub mod table;

pub use config::{ExperimentConfig, Scenario};
pub use error::{CliError, Result};
pub use run::{execute, Artifact, RunOptions};
