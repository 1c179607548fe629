use std::process::ExitCode;

use capa_cli::Cli;
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match capa_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("capa: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
