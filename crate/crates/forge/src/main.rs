use std::process::ExitCode;

use clap::Parser;
use srm_forge::cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    let result = run(Cli::parse());
    if let Err(e) = &result {
        eprintln!("srm-forge: error: {e:#}");
    }
    ExitCode::from(exit_code(&result))
}
