//! Config parsing and the batch pipeline behind the `sonotrace` binary.

pub mod config;
pub mod run;

pub use config::{parse_config, parse_str, ConfigError, SimConfig};
pub use run::{run, RunError, RunOptions, RunReport};
