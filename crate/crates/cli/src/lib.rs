//! Command line front end, configuration files and output formats for the
//! `rapidgate-core` simulator.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod runner;
pub mod svg;
pub mod units;

pub use cli::main_with_args;
pub use config::{parse_config, RunConfig};
pub use error::CliError;
