//! Latent-space quality metrics: code compactness and perceptual path
//! length under a built-in generator.

use std::collections::BTreeMap;
use std::path::PathBuf;

use latentprobe::corpus::load_corpus;
use latentprobe::genmetrics::{
    ppl, reg_compactness, sample_gaussian_pairs, IdentityGenerator, LinearGenerator, SquaredL2,
};
use latentprobe::reporting::{ReportSection, SectionBody};
use ndarray::Axis;

use crate::cmd::CommonArgs;
use crate::errors::CliError;
use crate::run::{config_digest, corpus_digest, write_run_report, Stopwatch};

const DEFAULT_PAIRS: usize = 10_000;
const DEFAULT_PPL_EPSILON: f64 = 1e-4;
const DEFAULT_LATENT_DIM: usize = 512;

#[derive(clap::Subcommand)]
pub enum MetricsCmd {
    /// Mean distance of the corpus codes from their mean code.
    Reg(RegArgs),
    /// Perceptual path length along latent interpolations.
    Ppl(PplArgs),
}

pub fn run(cmd: MetricsCmd) -> Result<(), CliError> {
    match cmd {
        MetricsCmd::Reg(args) => run_reg(args),
        MetricsCmd::Ppl(args) => run_ppl(args),
    }
}

#[derive(clap::Args)]
pub struct RegArgs {
    /// Corpus manifest, or a directory containing manifest.json.
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

fn run_reg(args: RegArgs) -> Result<(), CliError> {
    let digest = corpus_digest(&args.corpus)?;
    let mut watch = Stopwatch::start();
    let corpus = load_corpus(&args.corpus)?;
    watch.lap("load");
    let codes = corpus.flattened().mapv(f64::from);
    let w_bar = codes.mean_axis(Axis(0)).expect("corpus is never empty");
    let reg = reg_compactness(codes.view(), w_bar.view())?;
    watch.lap("compute");

    let config = serde_json::json!({
        "corpus": args.corpus,
        "n": corpus.n(),
        "layers": corpus.layers(),
        "dim": corpus.dim(),
    });
    let mut values = BTreeMap::new();
    values.insert("reg".to_string(), reg);
    let section = ReportSection {
        id: "reg".to_string(),
        title: "Latent compactness".to_string(),
        config,
        body: SectionBody::Scalars { values },
    };
    let path = write_run_report(&args.common.out, section, digest, watch)?;
    println!("reg {reg}");
    println!("report: {}", path.display());
    Ok(())
}

#[derive(clap::Args)]
pub struct PplArgs {
    /// Number of Monte-Carlo latent pairs.
    #[arg(long)]
    pairs: Option<usize>,
    /// Interpolation step size in (0, 1].
    #[arg(long)]
    epsilon_ppl: Option<f64>,
    /// Latent dimension of the sampled pairs.
    #[arg(long)]
    dim: Option<usize>,
    /// Generator under test: "identity" or "linear".
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: CommonArgs,
}

fn run_ppl(args: PplArgs) -> Result<(), CliError> {
    let cfg = args.common.file_config()?;
    let pairs = args.pairs.or(cfg.pairs).unwrap_or(DEFAULT_PAIRS);
    let epsilon = args
        .epsilon_ppl
        .or(cfg.epsilon_ppl)
        .unwrap_or(DEFAULT_PPL_EPSILON);
    let dim = args.dim.or(cfg.dim).unwrap_or(DEFAULT_LATENT_DIM);
    let generator = args
        .generator
        .or_else(|| cfg.generator.clone())
        .unwrap_or_else(|| "identity".to_string());
    let seed = args.seed.or(cfg.seed).unwrap_or(0);

    let config = serde_json::json!({
        "pairs": pairs,
        "epsilon_ppl": epsilon,
        "dim": dim,
        "generator": generator,
        "seed": seed,
    });

    let mut watch = Stopwatch::start();
    let latents = sample_gaussian_pairs(pairs, dim, seed);
    let value = match generator.as_str() {
        "identity" => ppl(&IdentityGenerator::new(dim), &SquaredL2, &latents, epsilon, seed)?,
        "linear" => {
            let gen = LinearGenerator::seeded(dim, dim, seed);
            ppl(&gen, &SquaredL2, &latents, epsilon, seed)?
        }
        other => {
            return Err(CliError::validation(format!(
                "unknown generator {other:?}; use identity or linear"
            )))
        }
    };
    watch.lap("compute");

    let mut values = BTreeMap::new();
    values.insert("ppl".to_string(), value);
    let digest = config_digest(&config);
    let section = ReportSection {
        id: "ppl".to_string(),
        title: "Perceptual path length".to_string(),
        config,
        body: SectionBody::Scalars { values },
    };
    let path = write_run_report(&args.common.out, section, digest, watch)?;
    println!("ppl {value}");
    println!("report: {}", path.display());
    Ok(())
}
