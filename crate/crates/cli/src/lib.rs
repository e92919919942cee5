//! Configuration, dispatch and file output for the `fcms` binary.

pub mod config;
pub mod output;
pub mod run;

pub use config::{ConfigError, RunConfig};
pub use run::{run, RunError, RunOutcome, Subcommand};
