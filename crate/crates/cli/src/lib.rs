//! Command-line front end: config loading, CSV output and SVG plots.

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;
use ltfade_core::Error;

pub mod args;
pub mod commands;
pub mod config;
pub mod lists;
pub mod svg;
pub mod table;

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidModel(_) | Error::Contract(_) | Error::Precondition(_) => 2,
        Error::Numerical(_) | Error::Calibration(_) => 3,
        Error::Validation(_) => 4,
    }
}

pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = commands::Settings::new(&cli).and_then(|s| {
        let report = commands::execute(&cli, &s)?;
        commands::emit(&report, &s)?;
        Ok(report.failure)
    });
    match result {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(e)) | Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
