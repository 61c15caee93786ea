use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = affapprox::Cli::parse();
    ExitCode::from(affapprox::run(&cli))
}
