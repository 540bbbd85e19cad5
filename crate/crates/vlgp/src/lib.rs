//! Command-line front end for `vlgp-core`: simulation, fitting, prediction and
//! benchmark suites with CSV data files and JSON configuration.

pub mod benchmark;
pub mod cli;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod model;

pub use cli::{run, Cli};
pub use error::{CliError, CliResult};
