//! `holoscope`: detect, inject, sweep, bench and generate.
//!
//! Exit codes: 0 success, 2 usage, 3 data error, 4 convergence failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{BenchCmd, DetectCmd, GenerateCmd, InjectCmd, SweepCmd};

#[derive(Parser, Debug)]
#[command(name = "holoscope", version, about = "Dense-block fraud detection on rating graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Find the most suspicious user block and rank objects.
    Detect(DetectCmd),
    /// Add a labelled fraud block to an edge list.
    Inject(InjectCmd),
    /// Accuracy against injected block density.
    Sweep(SweepCmd),
    /// Detector runtime against graph size.
    Bench(BenchCmd),
    /// Write a synthetic edge list.
    Generate(GenerateCmd),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match &cli.command {
        Command::Detect(c) => commands::detect(c),
        Command::Inject(c) => commands::inject(c),
        Command::Sweep(c) => commands::sweep(c),
        Command::Bench(c) => commands::bench(c),
        Command::Generate(c) => commands::generate(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
