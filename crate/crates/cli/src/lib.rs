//! Command-line surface of ccfit.
//!
//! Exit codes: 0 success, 2 input/output failure, 3 invalid configuration,
//! 4 internal invariant violation.

pub mod commands;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub use commands::Cli;
pub use error::{CliError, CliResult};

/// Parses `args` (program name first) and runs the command, returning the exit code.
pub fn run<I, T>(args: I, log: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let _ = write!(log, "{e}");
            return 3;
        }
    };
    match commands::execute(&cli, log) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(log, "error: {e}");
            e.exit_code()
        }
    }
}
