//! Configuration loading, experiment commands and table output for the
//! `nvcool` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

pub use commands::{run, Report};
pub use config::{load_config, Mode, Profile, RunSpec};
pub use error::{CliError, CliResult};
pub use table::Table;
