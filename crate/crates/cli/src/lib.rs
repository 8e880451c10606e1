//! Command-line front end of `fracwell`: parameter parsing, experiment
//! orchestration, CSV/JSON/SVG output and the verification suites.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod verify;

use std::ffi::OsString;

use clap::{CommandFactory, Parser};

pub use config::{Cli, RunConfig};
pub use error::CliError;

/// Parse `argv`, run the command and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = RunConfig::resolve(cli.flags, std::env::var("FW_SEED").ok())
        .and_then(|cfg| commands::execute(&cli.command, &cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            e.exit_code()
        }
    }
}
