use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = sonnet::cli::Cli::parse();
    match sonnet::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.record());
            ExitCode::FAILURE
        }
    }
}
