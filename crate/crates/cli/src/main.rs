//! `gcr`: fit, simulate, diagnose and cross-validate generalized
//! correlation regression models from the command line.

mod args;
mod commands;
mod error;
mod manifest;
mod table;

use std::process::ExitCode;

use clap::error::ErrorKind as ClapKind;
use clap::Parser;

use args::{Cli, Command};
use error::CliError;
use gcr_core::par::Exec;

/// Outcome of a command that ran to completion.
pub enum Status {
    Ok,
    /// Estimation stopped at the iteration cap; artifacts were still written.
    NotConverged(String),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ClapKind::DisplayHelp | ClapKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let err = CliError::Usage(e.kind().to_string());
            err.report();
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::NotConverged(msg)) => {
            let err = CliError::NotConverged(msg);
            err.report();
            ExitCode::from(err.exit_code())
        }
        Err(err) => {
            err.report();
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<Status, CliError> {
    let exec = configure_threads(cli.threads)?;
    let argv: Vec<String> = std::env::args().collect();
    match cli.command {
        Command::Fit(a) => commands::fit::run(&a, exec, &argv),
        Command::Simulate(a) => commands::simulate::run(&a, exec, &argv),
        Command::Diagnose(a) => commands::diagnose::run(&a, exec, &argv),
        Command::Cv(a) => commands::cv::run(&a, exec, &argv),
    }
}

fn configure_threads(threads: Option<usize>) -> Result<Exec, CliError> {
    match threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(1) => Ok(Exec::Sequential),
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?;
            Ok(Exec::Parallel)
        }
        None => Ok(Exec::Parallel),
    }
}
