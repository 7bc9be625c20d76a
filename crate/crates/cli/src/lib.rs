//! Library side of the `gkp` command-line tool, so the commands can be
//! driven from tests as well as from the binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use config::{Cli, Command, RunConfig};
pub use error::{CliError, CliResult};

pub fn run(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    let config = RunConfig::resolve(&cli.config)?;
    match &cli.command {
        Command::Atlas => commands::cmd_atlas(&config),
        Command::Groundstate(a) => commands::cmd_groundstate(&config, a),
        Command::Sweep(a) => commands::cmd_sweep(&config, a),
        Command::Analyze(a) => commands::cmd_analyze(&config, a),
        Command::Bound(a) => commands::cmd_bound(&config, a),
        Command::Measure(a) => commands::cmd_measure(&config, a),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> CliResult<Vec<PathBuf>>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Invalid(e.to_string()))?;
    run(&cli)
}
