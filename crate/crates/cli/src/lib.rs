//! File formats and the command-line front end for `molcap-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod report;
pub mod vocab_file;

pub use error::{CliError, Result};
