//! File formats, parallel sweeps and the command-line front end for
//! [`affapprox_core`].
//!
//! Every subcommand reads JSON, writes a JSON or CSV report and exits with
//! 0 when all asserted inequalities hold, 1 when one fails, and 2 on bad
//! input.

pub mod cli;
pub mod commands;
pub mod formats;
pub mod parallel;

use std::path::PathBuf;

pub use cli::{Cli, Command, Global};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] affapprox_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    match commands::execute(cli) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}
