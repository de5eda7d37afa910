//! Experiment runner for the emergent-language lab: run configurations,
//! sweeps, and file-level wrappers around the analysis library.

pub mod commands;
pub mod config;
pub mod error;
pub mod run;
pub mod sweep;
pub mod transmit;

pub use config::{Grid, RunConfig};
pub use error::{CliError, Result};
pub use run::{execute_run, RecordRow, RunRecord};
