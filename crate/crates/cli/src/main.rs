//! `voltpred`: dataset generation, training, evaluation and the two
//! comparative studies behind one binary.
//!
//! Exit codes: 0 ok, 1 runtime failure, 2 configuration or format error,
//! 3 generation failure, 4 missing inputs.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, Common};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Generation(String),
    Missing(String),
    Run(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Run(_) => 1,
            CliError::Config(_) => 2,
            CliError::Generation(_) => 3,
            CliError::Missing(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Generation(m) => write!(f, "generation: {m}"),
            CliError::Missing(m) => write!(f, "missing input: {m}"),
            CliError::Run(m) => write!(f, "{m}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Common { seed, workers } = cli.common().clone();
    let exec = voltpred::Exec::with_workers(workers);
    let result = match &cli.command {
        Command::Gen(a) => commands::gen(a, seed, exec),
        Command::Train(a) => commands::train(a, seed, exec),
        Command::Eval(a) => commands::eval(a, exec),
        Command::Ablate(a) => commands::ablate(a, seed, exec),
        Command::Generalize(a) => commands::generalize(a, seed, exec),
        Command::Predict(a) => commands::predict(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
