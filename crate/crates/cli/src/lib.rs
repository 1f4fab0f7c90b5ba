//! Configuration, file output and study drivers for the `barenblatt` binary.

pub mod audit;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod shape;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
