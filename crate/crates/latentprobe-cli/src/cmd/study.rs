//! Rank-product and preference statistics over study result tables.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use latentprobe::genmetrics::{preference, RankMatrix, RankProduct};
use latentprobe::reporting::{ReportSection, SectionBody};

use crate::cmd::CommonArgs;
use crate::errors::{at_path, CliError};
use crate::run::{ensure_dir, inputs_digest, write_run_report, Stopwatch};

#[derive(clap::Subcommand)]
pub enum StudyCmd {
    /// Rank products (and optional preference rates) from study tables.
    RankProduct(RankProductArgs),
}

pub fn run(cmd: StudyCmd) -> Result<(), CliError> {
    match cmd {
        StudyCmd::RankProduct(args) => run_rank_product(args),
    }
}

#[derive(clap::Args)]
pub struct RankProductArgs {
    /// CSV with header question_id,method,avg_rank.
    #[arg(long)]
    ranks: PathBuf,
    /// Optional CSV with header comparison,preferred (one 0/1 per response).
    #[arg(long)]
    preferences: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

fn run_rank_product(args: RankProductArgs) -> Result<(), CliError> {
    let mut input_files = vec![args.ranks.as_path()];
    if let Some(p) = &args.preferences {
        input_files.push(p.as_path());
    }
    let digest = inputs_digest(&input_files)?;

    let mut watch = Stopwatch::start();
    let file = File::open(&args.ranks).map_err(|e| at_path(&args.ranks, CliError::io(e.to_string())))?;
    let matrix = RankMatrix::from_csv(BufReader::new(file)).map_err(|e| at_path(&args.ranks, e))?;
    let preferences = match &args.preferences {
        Some(path) => read_preferences(path)?,
        None => BTreeMap::new(),
    };
    watch.lap("load");
    let products = matrix.rank_products();
    watch.lap("compute");

    let out = &args.common.out;
    ensure_dir(out)?;
    write_rank_csv(&products, &out.join("rank_products.csv"))?;

    println!("rank products (lower is better):");
    let mut by_value: Vec<&RankProduct> = products.iter().collect();
    by_value.sort_by(|a, b| a.value.total_cmp(&b.value));
    for rp in by_value {
        println!("  {} {}", rp.method, rp.value);
    }
    for (name, pct) in &preferences {
        println!("preference {name}: {pct}%");
    }

    let config = serde_json::json!({
        "ranks": args.ranks,
        "preferences": args.preferences,
    });
    let section = ReportSection {
        id: "study".to_string(),
        title: "Study statistics".to_string(),
        config,
        body: SectionBody::Study {
            rank_products: products,
            preferences,
        },
    };
    let path = write_run_report(out, section, digest, watch)?;
    println!("report: {}", path.display());
    Ok(())
}

/// Reads grouped binary outcomes: each row is one response, `preferred`
/// is 0/1 (or true/false), and rates are computed per comparison name.
fn read_preferences(path: &Path) -> Result<BTreeMap<String, f64>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| at_path(path, CliError::io(e.to_string())))?;
    let headers = reader
        .headers()
        .map_err(|e| at_path(path, CliError::io(e.to_string())))?;
    if headers.iter().collect::<Vec<_>>() != ["comparison", "preferred"] {
        return Err(at_path(
            path,
            CliError::validation("expected header comparison,preferred"),
        ));
    }

    let mut groups: BTreeMap<String, Vec<bool>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| at_path(path, CliError::io(e.to_string())))?;
        let comparison = record.get(0).unwrap_or_default();
        let outcome = match record.get(1).unwrap_or_default().trim() {
            "0" | "false" => false,
            "1" | "true" => true,
            other => {
                return Err(at_path(
                    path,
                    CliError::validation(format!(
                        "preferred must be 0, 1, true, or false; got {other:?}"
                    )),
                ))
            }
        };
        groups.entry(comparison.to_string()).or_default().push(outcome);
    }

    groups
        .into_iter()
        .map(|(name, outcomes)| Ok((name, preference(&outcomes)?)))
        .collect()
}

fn write_rank_csv(products: &[RankProduct], path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| at_path(path, CliError::io(e.to_string())))?;
    let io = |e: csv::Error| at_path(path, CliError::io(e.to_string()));
    w.write_record(["method", "rank_product"]).map_err(io)?;
    for rp in products {
        w.write_record([rp.method.clone(), format!("{}", rp.value)])
            .map_err(io)?;
    }
    w.flush().map_err(|e| at_path(path, CliError::io(e.to_string())))
}
