//! Command-line front end for `paramred`.
//!
//! Every command reads one sample CSV (or generates samples, for `bench`),
//! computes its full result set in memory and only then writes it to the
//! output directory. Exit codes: 0 success, 1 usage error, 2 data error,
//! 3 numerical failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;
use paramred::ErrorClass;

pub mod args;
pub mod bench;
mod commands;
pub mod output;

pub use args::Cli;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(paramred::Error),
    Io { path: PathBuf, message: String },
}

impl From<paramred::Error> for CliError {
    fn from(e: paramred::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_DATA,
            CliError::Core(e) => match e.class() {
                ErrorClass::Usage => EXIT_USAGE,
                ErrorClass::Data => EXIT_DATA,
                ErrorClass::Numerical => EXIT_NUMERICAL,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io { path, message } => write!(f, "{}: {message}", path.display()),
            CliError::Core(e) => {
                write!(f, "{e}")?;
                match e {
                    paramred::Error::Divergence { .. } => write!(f, " (try a smaller --learning-rate)"),
                    paramred::Error::IllConditioned(_) => write!(f, " (try a larger --ridge or a lower --degree)"),
                    _ => Ok(()),
                }
            }
        }
    }
}

/// Parse `args` (including the program name) and run the command.
/// Returns the process exit code; diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
