//! Batch front end: scenario files, simulation runs, reports and
//! comparisons.

pub mod commands;
pub mod config;
pub mod error;
pub mod files;
pub mod run;

pub use commands::{execute, Cli};
pub use config::{Inputs, ScenarioFile};
pub use error::{CliError, Result};
pub use run::{simulate, write_outputs, ForecastKind, Mode, RunOptions, RunOutput};
