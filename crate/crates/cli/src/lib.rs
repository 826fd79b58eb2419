//! Experiment runner behind the `rough-mlmc` binary.

pub mod config;
pub mod error;
pub mod output;
pub mod resolve;
pub mod run;

pub use config::Cli;
pub use error::{exit, CliError, CliResult};
pub use run::run;
