//! `msltm`: command-line front end for msl-transfer.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid input, 3 validation failure,
//! 4 numeric failure.

mod args;
mod commands;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            std::process::exit(code);
        }
    };
    let result = match &cli.command {
        Command::Validate(common) => commands::validate(common),
        Command::Bands(a) => commands::bands(a),
        Command::Escape(a) => commands::escape(a),
        Command::Stability(a) => commands::stability(a),
    };
    if let Err(failure) = result {
        eprintln!("error: {failure}");
        std::process::exit(failure.exit_code());
    }
}
