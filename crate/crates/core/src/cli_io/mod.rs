//! Configuration, run directories and their file formats.

pub mod checks;
pub mod config;
pub mod records;
pub mod session;
pub mod snapshot;

pub use config::{load_config, parse_config, RunConfig};
