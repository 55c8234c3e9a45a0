//! Configuration parsing and command execution for the `spectral-sde` binary.

pub mod config;
pub mod run;

pub use config::{parse_config, serialize, Command, ConfigError, RunConfig};
pub use run::{resolve_seed, run, Report, RunError, EXIT_ERROR, EXIT_FAIL, EXIT_PASS};
