//! Command-line front end for the actuator design toolkit.

pub mod commands;
pub mod config;
pub mod error;

pub use config::{parse_config, RunConfig};
pub use error::CliError;
