use std::process::ExitCode;

use clap::Parser;
use tsidec_cli::commands::{execute, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}
