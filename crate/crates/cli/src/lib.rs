//! The `solicit` command line.

use std::time::Instant;

use clap::Parser;

mod args;
mod commands;
mod config;
mod manifest;

pub use args::Cli;
use args::Command;
use manifest::{digest_inputs, RunManifest};

/// A failed run: exit code 2 for bad usage, 1 for bad data.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub msg: String,
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure { code: 2, msg: msg.into() }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Failure { code: 1, msg: msg.into() }
    }
}

impl From<solicit_core::Error> for Failure {
    fn from(e: solicit_core::Error) -> Self {
        Failure::data(e.to_string())
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let started = Instant::now();
    let seed = cli.seed;
    let outcome = match &cli.command {
        Command::Simulate(a) => commands::simulate(a, seed)?,
        Command::Featurize(a) => commands::featurize(a)?,
        Command::Analyze(a) => commands::analyze(a)?,
        Command::Train(a) => commands::train_cmd(a, seed)?,
        Command::Eval(a) => commands::eval(a, seed)?,
        Command::Recommend(a) => commands::recommend_cmd(a)?,
        Command::Experiment(a) => commands::experiment(a, seed)?,
        Command::Serve(a) => commands::serve(a, seed)?,
    };
    if outcome.outputs.is_empty() {
        return Ok(());
    }
    let mut inputs = Vec::new();
    for p in &outcome.inputs {
        inputs.extend(digest_inputs(p)?);
    }
    let manifest = RunManifest {
        subcommand: cli.command.name().to_string(),
        flags: serde_json::to_value(cli).map_err(|e| Failure::data(e.to_string()))?,
        inputs,
        seed,
        outputs: outcome.outputs.clone(),
        wall_time_secs: started.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        notes: outcome.notes,
    };
    for out in &outcome.outputs {
        manifest.write_beside(out)?;
    }
    Ok(())
}

/// Runs the CLI on `argv` and returns the process exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let argv = match config::expand(argv) {
        Ok(a) => a,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            return f.code;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}
