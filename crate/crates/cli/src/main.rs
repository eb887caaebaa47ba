//! `sideband`: command-line front end for the sideband noise simulator.
//!
//! Exit codes: 0 success, 2 I/O, 3 parse error, 4 validation or usage
//! error, 5 numerical or statistical failure.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// An error carrying its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn io(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
    pub fn parse(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }
    pub fn invalid(message: impl Into<String>) -> Self {
        Failure { code: 4, message: message.into() }
    }
    pub fn numerical(message: impl Into<String>) -> Self {
        Failure { code: 5, message: message.into() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(4);
        }
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Validate(a) => commands::validate(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Scenario(a) => commands::scenario(&a),
        Command::Oracle(a) => commands::oracle(&a),
        Command::Design(a) => commands::design(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
