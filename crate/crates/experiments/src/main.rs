use std::process::ExitCode;

use clap::Parser;
use ddtraj_experiments::cli::{run, Cli};

fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}
