//! `mentor` binary entry point.

use std::process::exit;

use clap::Parser;
use mentor_cli::args::{Cli, Command};
use mentor_cli::commands;

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => commands::train(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Replay(args) => commands::replay(args),
        Command::ServeCheck(args) => commands::serve_check(args),
    };
    match result {
        Ok(code) => exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            exit(e.code());
        }
    }
}
