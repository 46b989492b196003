use std::process::ExitCode;

use clap::Parser;
use dyadic_cli::cli::{execute, load, Cli, LoadError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = cli.command.split();
    let runs = match load(args) {
        Ok(runs) => runs,
        Err(e) => {
            eprintln!("error: {e:#}");
            return if e.is::<LoadError>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            };
        }
    };
    let failures = execute(experiment, &runs);
    for (out, e) in &failures {
        eprintln!("error in {}: {e:#}", out.display());
    }
    if failures.is_empty() {
        for (_, out) in &runs {
            println!("{} -> {}", experiment.name(), out.display());
        }
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
