//! Synthetic corpus generation from a JSON spec.

use std::collections::BTreeMap;
use std::path::PathBuf;

use latentprobe::corpus::{save_corpus, synth_generate, SyntheticSpec};
use latentprobe::reporting::{ReportSection, SectionBody};

use crate::cmd::CommonArgs;
use crate::errors::CliError;
use crate::run::{inputs_digest, write_run_report, Stopwatch};

#[derive(clap::Subcommand)]
pub enum SynthCmd {
    /// Generate a labeled synthetic corpus from a JSON spec.
    Generate(GenerateArgs),
}

pub fn run(cmd: SynthCmd) -> Result<(), CliError> {
    match cmd {
        SynthCmd::Generate(args) => run_generate(args),
    }
}

#[derive(clap::Args)]
pub struct GenerateArgs {
    /// JSON corpus specification.
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the spec's seed, for seed sweeps from one file.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: CommonArgs,
}

fn run_generate(args: GenerateArgs) -> Result<(), CliError> {
    let cfg = args.common.file_config()?;
    let text = std::fs::read_to_string(&args.spec)
        .map_err(|e| CliError::io(format!("{}: {e}", args.spec.display())))?;
    let mut spec: SyntheticSpec =
        serde_json::from_str(&text).map_err(|e| CliError::from_json(&args.spec, e))?;
    if let Some(seed) = args.seed.or(cfg.seed) {
        spec.seed = seed;
    }

    let digest = inputs_digest(&[&args.spec])?;
    let mut watch = Stopwatch::start();
    let corpus = synth_generate(&spec)?;
    watch.lap("compute");
    let out = &args.common.out;
    let provenance = format!("synthetic; spec {digest}");
    let manifest = save_corpus(&corpus, out, &provenance)?;
    watch.lap("write");

    let config = serde_json::to_value(&spec)
        .map_err(|e| CliError::validation(format!("spec echo: {e}")))?;
    let values: BTreeMap<String, f64> = [
        ("n".to_string(), spec.n as f64),
        ("layers".to_string(), spec.layers as f64),
        ("dim".to_string(), spec.dim as f64),
        ("sigma".to_string(), spec.sigma),
    ]
    .into();
    let section = ReportSection {
        id: "corpus".to_string(),
        title: "Synthetic corpus".to_string(),
        config,
        body: SectionBody::Scalars { values },
    };
    let path = write_run_report(out, section, digest, watch)?;
    println!(
        "corpus: {} samples x {} layers x {} dims -> {}",
        spec.n,
        spec.layers,
        spec.dim,
        manifest.display()
    );
    println!("report: {}", path.display());
    Ok(())
}
