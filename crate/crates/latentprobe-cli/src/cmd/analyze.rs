//! Corpus analyses: the per-layer MI profile, the 2-D embedding map, the
//! gloss axis, and per-layer unique importance.

use std::fs::File;
use std::path::{Path, PathBuf};

use latentprobe::corpus::{load_corpus, Factor};
use latentprobe::embedviz::{tsne, TsneConfig};
use latentprobe::factoraxis::{
    fit_gloss_axis, layer_unique_importance, DEFAULT_FOLDS, DEFAULT_LAMBDA, DEFAULT_REPETITIONS,
};
use latentprobe::infotheory::{layer_mi_profile, MiConfig, MiProfile};
use latentprobe::reporting::{EmbeddingPoint, GlossPoint, ReportSection, SectionBody};
use ndarray::Array2;

use crate::cmd::CommonArgs;
use crate::config::FileConfig;
use crate::errors::{at_path, CliError};
use crate::run::{corpus_digest, ensure_dir, write_run_report, Stopwatch};

#[derive(clap::Subcommand)]
pub enum AnalyzeCmd {
    /// Debiased conditional MI between every layer and a target factor.
    Mi(MiArgs),
    /// 2-D embedding map of the corpus.
    Tsne(TsneArgs),
    /// Cross-validated ridge axis predicting gloss from one layer.
    GlossAxis(GlossAxisArgs),
    /// Unique contribution of every layer to predicting a factor.
    LayerImportance(ImportanceArgs),
}

pub fn run(cmd: AnalyzeCmd) -> Result<(), CliError> {
    match cmd {
        AnalyzeCmd::Mi(args) => run_mi(args),
        AnalyzeCmd::Tsne(args) => run_tsne(args),
        AnalyzeCmd::GlossAxis(args) => run_gloss_axis(args),
        AnalyzeCmd::LayerImportance(args) => run_importance(args),
    }
}

fn require_target(flag: Option<String>, cfg: &FileConfig) -> Result<Factor, CliError> {
    let name = flag
        .or_else(|| cfg.target.clone())
        .ok_or_else(|| CliError::validation("--target is required (flag or config)"))?;
    Ok(Factor::parse(&name)?)
}

/// Explicit conditioning is parsed as given; the default is no conditioning
/// (marginal MI). Stratifying over every other factor by default would
/// shatter moderate corpora into strata too small to estimate from, so the
/// conditioning set is always a deliberate choice.
fn resolve_conditioning(explicit: Option<Vec<String>>) -> Result<Vec<Factor>, CliError> {
    match explicit {
        Some(names) => names
            .iter()
            .map(|n| Factor::parse(n).map_err(CliError::from))
            .collect(),
        None => Ok(Vec::new()),
    }
}

// ---------------------------------------------------------------- analyze mi

#[derive(clap::Args)]
pub struct MiArgs {
    /// Corpus manifest, or a directory containing manifest.json.
    #[arg(long)]
    corpus: PathBuf,
    /// Target factor (gloss, style, geometry, illumination, color).
    #[arg(long)]
    target: Option<String>,
    /// Comma-separated conditioning factors; defaults to none.
    #[arg(long, value_delimiter = ',')]
    conditioning: Option<Vec<String>>,
    /// PCA width of the neighbor space.
    #[arg(long)]
    reduce_dim: Option<usize>,
    /// Neighbor count of the class-probability model.
    #[arg(long)]
    k: Option<usize>,
    /// Cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
    /// Within-stratum label permutations in the debiasing baseline.
    #[arg(long)]
    perms: Option<usize>,
    /// Total Dirichlet smoothing mass.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: CommonArgs,
}

fn run_mi(args: MiArgs) -> Result<(), CliError> {
    let cfg = args.common.file_config()?;
    let target = require_target(args.target, &cfg)?;
    let conditioning = resolve_conditioning(args.conditioning.or(cfg.conditioning))?;
    let defaults = MiConfig::default();
    let mi_cfg = MiConfig {
        reduce_dim: args.reduce_dim.or(cfg.reduce_dim).unwrap_or(defaults.reduce_dim),
        k: args.k.or(cfg.k).unwrap_or(defaults.k),
        folds: args.folds.or(cfg.folds).unwrap_or(defaults.folds),
        permutations: args.perms.or(cfg.perms).unwrap_or(defaults.permutations),
        alpha: args.alpha.or(cfg.alpha).unwrap_or(defaults.alpha),
        seed: args.seed.or(cfg.seed).unwrap_or(defaults.seed),
    };

    let digest = corpus_digest(&args.corpus)?;
    let mut watch = Stopwatch::start();
    let corpus = load_corpus(&args.corpus)?;
    watch.lap("load");
    let profile = layer_mi_profile(&corpus, target, &conditioning, &mi_cfg)?;
    watch.lap("compute");

    let out = &args.common.out;
    ensure_dir(out)?;
    write_mi_csv(&profile, &out.join("mi_profile.csv"))?;

    let config = serde_json::json!({
        "corpus": args.corpus,
        "target": target.name(),
        "conditioning": conditioning.iter().map(|f| f.name()).collect::<Vec<_>>(),
        "estimator": mi_cfg,
    });
    let argmax = profile.argmax_layer();
    let peak = profile.layers[argmax].mi.corrected_bits;
    let section = ReportSection {
        id: "mi-profile".to_string(),
        title: format!("Conditional MI profile: {}", target.name()),
        config,
        body: SectionBody::MiProfile { profile },
    };
    let path = write_run_report(out, section, digest, watch)?;
    println!(
        "max corrected MI for {} at layer {argmax} ({peak:.4} bits)",
        target.name()
    );
    println!("report: {}", path.display());
    Ok(())
}

fn write_mi_csv(profile: &MiProfile, path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| at_path(path, CliError::io(e.to_string())))?;
    let io = |e: csv::Error| at_path(path, CliError::io(e.to_string()));
    w.write_record([
        "layer",
        "raw_bits",
        "perm_mean_bits",
        "perm_std_bits",
        "corrected_bits",
        "dropped_strata",
        "dropped_samples",
    ])
    .map_err(io)?;
    for row in &profile.layers {
        w.write_record([
            row.layer.to_string(),
            format!("{}", row.mi.raw_bits),
            format!("{}", row.mi.perm_mean_bits),
            format!("{}", row.mi.perm_std_bits),
            format!("{}", row.mi.corrected_bits),
            row.mi.dropped_strata.to_string(),
            row.mi.dropped_samples.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| at_path(path, CliError::io(e.to_string())))
}

// -------------------------------------------------------------- analyze tsne

#[derive(clap::Args)]
pub struct TsneArgs {
    /// Corpus manifest, or a directory containing manifest.json.
    #[arg(long)]
    corpus: PathBuf,
    /// Embed one layer instead of the full flattened corpus.
    #[arg(long)]
    layer: Option<usize>,
    /// Factor used to label the points, if any.
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    perplexity: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Early-exaggeration factor on the input affinities.
    #[arg(long)]
    exaggeration: Option<f64>,
    /// Iterations the exaggeration stays active.
    #[arg(long)]
    exaggeration_iters: Option<usize>,
    /// PCA pre-reduction width; 0 disables the reduction.
    #[arg(long)]
    pca_dims: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: CommonArgs,
}

fn run_tsne(args: TsneArgs) -> Result<(), CliError> {
    let cfg = args.common.file_config()?;
    let layer = args.layer.or(cfg.layer);
    let target = match args.target.or_else(|| cfg.target.clone()) {
        Some(name) => Some(Factor::parse(&name)?),
        None => None,
    };
    let defaults = TsneConfig::default();
    let tsne_cfg = TsneConfig {
        perplexity: args.perplexity.or(cfg.perplexity).unwrap_or(defaults.perplexity),
        iterations: args.iterations.or(cfg.iterations).unwrap_or(defaults.iterations),
        learning_rate: args
            .learning_rate
            .or(cfg.learning_rate)
            .unwrap_or(defaults.learning_rate),
        exaggeration: args
            .exaggeration
            .or(cfg.exaggeration)
            .unwrap_or(defaults.exaggeration),
        exaggeration_iters: args
            .exaggeration_iters
            .or(cfg.exaggeration_iters)
            .unwrap_or(defaults.exaggeration_iters),
        seed: args.seed.or(cfg.seed).unwrap_or(defaults.seed),
        pca_dims: match args.pca_dims.or(cfg.pca_dims) {
            Some(0) => None,
            Some(n) => Some(n),
            None => defaults.pca_dims,
        },
    };

    let digest = corpus_digest(&args.corpus)?;
    let mut watch = Stopwatch::start();
    let corpus = load_corpus(&args.corpus)?;
    watch.lap("load");
    let x: Array2<f64> = match layer {
        Some(l) => corpus.layer_matrix(l)?.mapv(f64::from),
        None => corpus.flattened().mapv(f64::from),
    };
    let result = tsne(x.view(), &tsne_cfg)?;
    watch.lap("compute");

    let labels: Option<&[u32]> = target.map(|f| corpus.labels().values(f));
    let points: Vec<EmbeddingPoint> = result
        .coords
        .outer_iter()
        .enumerate()
        .map(|(i, row)| EmbeddingPoint {
            x: row[0],
            y: row[1],
            label: labels.map(|l| l[i]),
        })
        .collect();

    let out = &args.common.out;
    ensure_dir(out)?;
    write_tsne_csv(&points, &out.join("tsne.csv"))?;

    let config = serde_json::json!({
        "corpus": args.corpus,
        "layer": layer,
        "target": target.map(Factor::name),
        "embedding": tsne_cfg,
    });
    let final_kl = result.kl_checkpoints.last().copied();
    let section = ReportSection {
        id: "tsne".to_string(),
        title: "2-D embedding map".to_string(),
        config,
        body: SectionBody::Tsne {
            points,
            kl_checkpoints: result.kl_checkpoints,
        },
    };
    let path = write_run_report(out, section, digest, watch)?;
    match final_kl {
        Some(kl) => println!("embedded {} points, final KL {kl:.4}", corpus.n()),
        None => println!("embedded {} points", corpus.n()),
    }
    println!("report: {}", path.display());
    Ok(())
}

fn write_tsne_csv(points: &[EmbeddingPoint], path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| at_path(path, CliError::io(e.to_string())))?;
    let io = |e: csv::Error| at_path(path, CliError::io(e.to_string()));
    w.write_record(["x", "y", "label"]).map_err(io)?;
    for p in points {
        w.write_record([
            format!("{}", p.x),
            format!("{}", p.y),
            p.label.map(|l| l.to_string()).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| at_path(path, CliError::io(e.to_string())))
}

// -------------------------------------------------------- analyze gloss-axis

#[derive(clap::Args)]
pub struct GlossAxisArgs {
    /// Corpus manifest, or a directory containing manifest.json.
    #[arg(long)]
    corpus: PathBuf,
    /// Layer whose embeddings feed the axis.
    #[arg(long)]
    layer: Option<usize>,
    /// Cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
    /// Ridge penalty.
    #[arg(long)]
    lambda: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

fn run_gloss_axis(args: GlossAxisArgs) -> Result<(), CliError> {
    let cfg = args.common.file_config()?;
    let layer = args
        .layer
        .or(cfg.layer)
        .ok_or_else(|| CliError::validation("--layer is required (flag or config)"))?;
    let folds = args.folds.or(cfg.folds).unwrap_or(DEFAULT_FOLDS);
    let lambda = args.lambda.or(cfg.lambda).unwrap_or(DEFAULT_LAMBDA);

    let digest = corpus_digest(&args.corpus)?;
    let mut watch = Stopwatch::start();
    let corpus = load_corpus(&args.corpus)?;
    watch.lap("load");
    let model = fit_gloss_axis(&corpus, layer, folds, lambda)?;
    let x = corpus.layer_matrix(layer)?.mapv(f64::from);
    let projections = model.project(x.view())?;
    watch.lap("compute");

    let gloss = corpus.labels().values(Factor::Gloss);
    let points: Vec<GlossPoint> = projections
        .iter()
        .zip(gloss)
        .map(|(&projection, &gloss)| GlossPoint { projection, gloss })
        .collect();

    let out = &args.common.out;
    ensure_dir(out)?;
    write_projection_csv(&points, &out.join("projections.csv"))?;

    let config = serde_json::json!({
        "corpus": args.corpus,
        "layer": layer,
        "folds": folds,
        "lambda": lambda,
    });
    println!(
        "gloss axis on layer {layer}: cv_mse {:.6} +/- {:.6}, spearman {:.4}",
        model.cv_mse_mean, model.cv_mse_std, model.spearman_rho
    );
    let section = ReportSection {
        id: "gloss-axis".to_string(),
        title: format!("Gloss axis on layer {layer}"),
        config,
        body: SectionBody::GlossAxis {
            model,
            projections: points,
        },
    };
    let path = write_run_report(out, section, digest, watch)?;
    println!("report: {}", path.display());
    Ok(())
}

fn write_projection_csv(points: &[GlossPoint], path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| at_path(path, CliError::io(e.to_string())))?;
    let io = |e: csv::Error| at_path(path, CliError::io(e.to_string()));
    w.write_record(["projection", "gloss"]).map_err(io)?;
    for p in points {
        w.write_record([format!("{}", p.projection), p.gloss.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| at_path(path, CliError::io(e.to_string())))
}

// -------------------------------------------------- analyze layer-importance

#[derive(clap::Args)]
pub struct ImportanceArgs {
    /// Corpus manifest, or a directory containing manifest.json.
    #[arg(long)]
    corpus: PathBuf,
    /// Target factor (gloss, style, geometry, illumination, color).
    #[arg(long)]
    target: Option<String>,
    /// Ridge penalty.
    #[arg(long)]
    lambda: Option<f64>,
    /// Permutation repetitions per layer.
    #[arg(long)]
    perms: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: CommonArgs,
}

fn run_importance(args: ImportanceArgs) -> Result<(), CliError> {
    let cfg = args.common.file_config()?;
    let target = require_target(args.target, &cfg)?;
    let lambda = args.lambda.or(cfg.lambda).unwrap_or(DEFAULT_LAMBDA);
    let repetitions = args.perms.or(cfg.perms).unwrap_or(DEFAULT_REPETITIONS);
    let seed = args.seed.or(cfg.seed).unwrap_or(0);

    let digest = corpus_digest(&args.corpus)?;
    let mut watch = Stopwatch::start();
    let corpus = load_corpus(&args.corpus)?;
    watch.lap("load");
    let table = layer_unique_importance(&corpus, target, lambda, repetitions, seed)?;
    watch.lap("compute");

    let out = &args.common.out;
    ensure_dir(out)?;
    let csv_path = out.join("importance.csv");
    let file = File::create(&csv_path).map_err(|e| at_path(&csv_path, CliError::io(e.to_string())))?;
    table
        .write_csv(file)
        .map_err(|e| at_path(&csv_path, CliError::io(e.to_string())))?;

    let config = serde_json::json!({
        "corpus": args.corpus,
        "target": target.name(),
        "lambda": lambda,
        "perms": repetitions,
        "seed": seed,
    });
    let argmax = table.argmax_layer();
    let peak = table.layers[argmax].delta_r2_mean;
    println!(
        "layer {argmax} carries the largest unique contribution to {} (delta R2 {peak:.4}, full R2 {:.4})",
        target.name(),
        table.r2_full
    );
    let section = ReportSection {
        id: "layer-importance".to_string(),
        title: format!("Unique layer contributions: {}", target.name()),
        config,
        body: SectionBody::LayerImportance { table },
    };
    let path = write_run_report(out, section, digest, watch)?;
    println!("report: {}", path.display());
    Ok(())
}
