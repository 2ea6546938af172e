use std::process::ExitCode;

use clap::Parser;
use dampedpp::cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("dampedpp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
