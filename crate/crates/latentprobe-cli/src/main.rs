//! `latentprobe`: one subcommand per analysis, one `report.json` per run.
//!
//! Every run resolves its parameters as flags over `--config` JSON over
//! built-in defaults, executes one library operation, and writes the result
//! into `--out` as a report plus side files (CSVs, PNGs, maps, SVGs).
//! Exit codes: 0 success, 1 invalid request, 2 file trouble.

mod cmd;
mod config;
mod errors;
mod run;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::errors::CliError;

#[derive(Parser)]
#[command(
    name = "latentprobe",
    version,
    about = "Layer-wise analysis of extended latent spaces",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand)]
enum Command {
    /// Per-layer corpus analyses: MI profiles, 2-D maps, factor axes.
    #[command(subcommand)]
    Analyze(cmd::analyze::AnalyzeCmd),
    /// Latent-space quality metrics.
    #[command(subcommand)]
    Metrics(cmd::metrics::MetricsCmd),
    /// Brushstroke maps and image comparison.
    #[command(subcommand)]
    Image(cmd::image::ImageCmd),
    /// Rank-product and preference statistics for study tables.
    #[command(subcommand)]
    Study(cmd::study::StudyCmd),
    /// Synthetic corpus generation.
    #[command(subcommand)]
    Synth(cmd::synth::SynthCmd),
    /// Post-processing of existing reports.
    #[command(subcommand)]
    Report(cmd::render::ReportCmd),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful outcomes; anything else is a
            // bad invocation.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = init_thread_pool() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code());
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze(c) => cmd::analyze::run(c),
        Command::Metrics(c) => cmd::metrics::run(c),
        Command::Image(c) => cmd::image::run(c),
        Command::Study(c) => cmd::study::run(c),
        Command::Synth(c) => cmd::synth::run(c),
        Command::Report(c) => cmd::render::run(c),
    }
}

/// Caps the global rayon pool when LATENTPROBE_THREADS is set. The cap only
/// bounds parallelism; results never depend on it.
fn init_thread_pool() -> Result<(), CliError> {
    let Some(raw) = std::env::var_os("LATENTPROBE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .to_str()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            CliError::validation(format!(
                "LATENTPROBE_THREADS must be a positive integer, got {raw:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::validation(format!("thread pool: {e}")))
}
