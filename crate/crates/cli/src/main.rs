use std::process::ExitCode;

use clap::Parser;
use consensus_subgrad_cli::{dispatch, Cli};

fn main() -> ExitCode {
    ExitCode::from(dispatch(Cli::parse()))
}
