//! Command-line front end: configuration and subcommands.

pub mod commands;
pub mod config;

pub use commands::Outcome;
pub use config::{DataSource, RunConfig, SCHEMA_VERSION};
