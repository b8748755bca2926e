//! Post-processing of existing reports.

use std::path::PathBuf;

use latentprobe::reporting::{emit_plots, load_report};

use crate::errors::{at_path, CliError};
use crate::run::ensure_dir;

#[derive(clap::Subcommand)]
pub enum ReportCmd {
    /// Draw the SVG plots for an existing report.
    Render(RenderArgs),
}

pub fn run(cmd: ReportCmd) -> Result<(), CliError> {
    match cmd {
        ReportCmd::Render(args) => run_render(args),
    }
}

#[derive(clap::Args)]
pub struct RenderArgs {
    /// Path to a report.json.
    #[arg(long)]
    report: PathBuf,
    /// Output directory for the SVG files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn run_render(args: RenderArgs) -> Result<(), CliError> {
    let report = load_report(&args.report).map_err(|e| at_path(&args.report, e))?;
    ensure_dir(&args.out)?;
    let files = emit_plots(&report, &args.out).map_err(|e| at_path(&args.out, e))?;
    if files.is_empty() {
        println!("no plottable sections in {}", args.report.display());
    }
    for file in files {
        println!("{}", file.display());
    }
    Ok(())
}
