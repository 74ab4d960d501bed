//! Scenario files, run artifacts and the `solve`, `sweep` and `validate` commands.

pub mod commands;
pub mod error;
pub mod output;
pub mod scenario_file;

pub use error::CliError;
