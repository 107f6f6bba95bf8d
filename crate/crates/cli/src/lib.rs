//! Command-line front end: argument parsing, config files, the OLS trainer
//! used by `experiment`, and SVG output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod ols;
pub mod svg;
pub mod table;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;
pub use error::{CliError, CliResult};

/// Parses `args` (program name first), honouring `--config`.
pub fn parse<I, T>(args: I) -> Result<Cli, ParseFailure>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = config::expand_args(args).map_err(ParseFailure::Config)?;
    Cli::try_parse_from(args).map_err(ParseFailure::Clap)
}

#[derive(Debug)]
pub enum ParseFailure {
    Config(CliError),
    Clap(clap::Error),
}

/// Parses and runs in-process.
pub fn run<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    match parse(args) {
        Ok(cli) => commands::execute(cli),
        Err(ParseFailure::Config(e)) => Err(e),
        Err(ParseFailure::Clap(e)) => Err(CliError::usage(e.to_string())),
    }
}
