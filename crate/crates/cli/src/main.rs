//! `qff`: train, distill, evaluate and search feedback strategies for
//! small quantum memories.

mod inputs;
mod learn;
mod manifest;
mod oracle;
mod report;

use anyhow::Result;
use clap::{Parser, Subcommand};
use qff_core::QffError;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qff", version, about = "Quantum-feedback workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the state-aware network with natural policy gradients.
    Train(learn::TrainArgs),
    /// Distill a trained or scripted teacher into a recurrent student.
    Distill(learn::DistillArgs),
    /// Evaluate a checkpoint or scripted policy.
    Evaluate(report::EvaluateArgs),
    /// Write last-hidden-layer activations as JSON lines.
    ExportActivations(report::ExportArgs),
    /// Brute-force and closed-form strategy oracles.
    #[command(subcommand)]
    Oracle(oracle::OracleCommand),
    /// Parse and validate scenario and training files.
    ValidateConfig(inputs::ValidateArgs),
    /// List the built-in scenarios or write them as JSON files.
    Scenarios(inputs::ScenariosArgs),
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("QFF_THREADS") {
        let n: usize = v.parse().map_err(|_| anyhow::anyhow!("QFF_THREADS must be a positive integer, got '{v}'"))?;
        anyhow::ensure!(n > 0, "QFF_THREADS must be a positive integer, got '{v}'");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Train(a) => learn::train(a),
        Command::Distill(a) => learn::distill(a),
        Command::Evaluate(a) => report::evaluate(a),
        Command::ExportActivations(a) => report::export(a),
        Command::Oracle(c) => oracle::run(c),
        Command::ValidateConfig(a) => inputs::validate(a),
        Command::Scenarios(a) => inputs::scenarios(a),
    }
}

/// 2 for numerical breakdown, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<QffError>() {
        Some(QffError::NonFinite(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
