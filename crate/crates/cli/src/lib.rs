//! Command-line driver: data generation, planning, training, evaluation,
//! probing, sweeps and reports over on-disk artifacts.

mod args;
mod commands;
mod data;

pub use args::{Cli, Command};
pub use data::DataDir;

use clap::Parser;
use gil_core::GilError;
use std::ffi::OsString;

/// Exit status for a failed command: 2 for bad input data, 1 otherwise.
pub fn exit_code(err: &GilError) -> i32 {
    if err.is_data_error() {
        2
    } else {
        1
    }
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
