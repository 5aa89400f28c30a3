use std::process::ExitCode;

use clap::Parser;
use sleepwake::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sleepwake: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
