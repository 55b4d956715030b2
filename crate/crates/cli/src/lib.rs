//! Configuration parsing, run orchestration and result persistence for the
//! `vibratrak` command.

pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod validate;

pub use config::{parse_config, Mode, RunConfig};
pub use error::CliError;
pub use run::{execute, RunOptions, RunReport};
