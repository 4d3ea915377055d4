//! Command-line driver for the micro-expression workbench.

mod cmd;
mod common;
mod error;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "mecross", version, about = "Micro-expression recognition with ethnic context")]
struct Cli {
    /// Worker threads [default: all cores].
    #[arg(long, global = true, env = "MECROSS_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a merged, annotated manifest (or a synthetic one).
    Manifest(cmd::manifest::ManifestArgs),
    /// Compute and cache flow images for every eligible sample.
    Flow(cmd::flow::FlowCmdArgs),
    /// Leave-one-subject-out training and evaluation.
    Loso(cmd::loso::LosoArgs),
    /// Mono- versus mixed-ethnicity sampling study.
    PrimaFacie(cmd::prima::PrimaArgs),
    /// Grad-CAM maps from trained checkpoints.
    Gradcam(cmd::gradcam::GradcamArgs),
    /// Summarize a run directory after checking provenance.
    Report(cmd::report::ReportArgs),
}

fn run(cli: Cli) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Manifest(a) => cmd::manifest::run(a),
        Command::Flow(a) => cmd::flow::run(a),
        Command::Loso(a) => cmd::loso::run(a),
        Command::PrimaFacie(a) => cmd::prima::run(a),
        Command::Gradcam(a) => cmd::gradcam::run(a),
        Command::Report(a) => cmd::report::run(a),
    }
}

/// The context chain joined by `: `, skipping causes already spelled out by
/// the message above them.
fn message(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{}", message(&e.error));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
