//! Brushstroke-map extraction and application, plus image comparison.

use std::collections::BTreeMap;
use std::path::PathBuf;

use latentprobe::nprimaging::{
    apply_brushstroke_map, extract_brushstroke_map, image_metrics, BrushstrokeMap, ImageBuffer,
    DEFAULT_EPSILON, DEFAULT_S_MAX,
};
use latentprobe::reporting::{ReportSection, SectionBody};

use crate::cmd::CommonArgs;
use crate::errors::{at_path, CliError};
use crate::run::{ensure_dir, inputs_digest, write_run_report, Stopwatch};

#[derive(clap::Subcommand)]
pub enum ImageCmd {
    /// Extract the per-pixel scale map taking a rendering to a painting.
    Brushmap(BrushmapArgs),
    /// Apply a stored map to a rendering.
    Apply(ApplyArgs),
    /// Pixel and structural metrics between two images.
    Compare(CompareArgs),
}

pub fn run(cmd: ImageCmd) -> Result<(), CliError> {
    match cmd {
        ImageCmd::Brushmap(args) => run_brushmap(args),
        ImageCmd::Apply(args) => run_apply(args),
        ImageCmd::Compare(args) => run_compare(args),
    }
}

#[derive(clap::Args)]
pub struct BrushmapArgs {
    /// Painted (stylized) image.
    #[arg(long)]
    painted: PathBuf,
    /// Rendered (reference) image.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Shadow-guard epsilon of the scale ratio.
    #[arg(long)]
    eps: Option<f64>,
    /// Upper clamp on the per-pixel scale.
    #[arg(long)]
    smax: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

fn run_brushmap(args: BrushmapArgs) -> Result<(), CliError> {
    let cfg = args.common.file_config()?;
    let eps = args.eps.or(cfg.eps).unwrap_or(DEFAULT_EPSILON);
    let s_max = args.smax.or(cfg.smax).unwrap_or(DEFAULT_S_MAX);

    let digest = inputs_digest(&[&args.painted, &args.reference])?;
    let mut watch = Stopwatch::start();
    let painted = ImageBuffer::load_png(&args.painted).map_err(|e| at_path(&args.painted, e))?;
    let rendered =
        ImageBuffer::load_png(&args.reference).map_err(|e| at_path(&args.reference, e))?;
    watch.lap("load");
    let map = extract_brushstroke_map(&painted, &rendered, eps, s_max)?;
    watch.lap("compute");

    let out = &args.common.out;
    ensure_dir(out)?;
    let map_path = out.join("brushmap.bin");
    map.save(&map_path).map_err(|e| at_path(&map_path, e))?;
    let preview_path = out.join("brushmap_preview.png");
    map.save_preview_png(&preview_path)
        .map_err(|e| at_path(&preview_path, e))?;

    let data = map.data();
    let count = data.len() as f64;
    let mean = data.iter().sum::<f64>() / count;
    let min = data.iter().copied().fold(f64::INFINITY, f64::min);
    let max = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (h, w, c) = map.dim();

    let config = serde_json::json!({
        "painted": args.painted,
        "ref": args.reference,
        "eps": eps,
        "smax": s_max,
    });
    let values: BTreeMap<String, f64> = [
        ("epsilon".to_string(), eps),
        ("s_max".to_string(), s_max),
        ("scale_mean".to_string(), mean),
        ("scale_min".to_string(), min),
        ("scale_max".to_string(), max),
    ]
    .into();
    let section = ReportSection {
        id: "brushmap".to_string(),
        title: "Brushstroke map extraction".to_string(),
        config,
        body: SectionBody::Scalars { values },
    };
    let path = write_run_report(out, section, digest, watch)?;
    println!("brushstroke map {h}x{w}x{c}: scale mean {mean:.4}, range [{min:.4}, {max:.4}]");
    println!("map: {}", map_path.display());
    println!("report: {}", path.display());
    Ok(())
}

#[derive(clap::Args)]
pub struct ApplyArgs {
    /// Stored brushstroke map.
    #[arg(long)]
    map: PathBuf,
    /// Rendered (reference) image the map is applied to.
    #[arg(long = "ref")]
    reference: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

fn run_apply(args: ApplyArgs) -> Result<(), CliError> {
    let digest = inputs_digest(&[&args.map, &args.reference])?;
    let mut watch = Stopwatch::start();
    let map = BrushstrokeMap::load(&args.map).map_err(|e| at_path(&args.map, e))?;
    let rendered =
        ImageBuffer::load_png(&args.reference).map_err(|e| at_path(&args.reference, e))?;
    watch.lap("load");
    let painted = apply_brushstroke_map(&rendered, &map)?;
    watch.lap("compute");

    let out = &args.common.out;
    ensure_dir(out)?;
    let painted_path = out.join("painted.png");
    painted
        .save_png(&painted_path)
        .map_err(|e| at_path(&painted_path, e))?;

    let count = painted.data().len() as f64;
    let mean_abs_change = painted
        .data()
        .iter()
        .zip(rendered.data().iter())
        .map(|(p, r)| (p - r).abs())
        .sum::<f64>()
        / count;
    let (h, w, c) = painted.dim();

    let config = serde_json::json!({
        "map": args.map,
        "ref": args.reference,
    });
    let values: BTreeMap<String, f64> =
        [("mean_abs_change".to_string(), mean_abs_change)].into();
    let section = ReportSection {
        id: "stylize".to_string(),
        title: "Brushstroke map application".to_string(),
        config,
        body: SectionBody::Scalars { values },
    };
    let path = write_run_report(out, section, digest, watch)?;
    println!("painted {h}x{w}x{c} image, mean absolute change {mean_abs_change:.4}");
    println!("image: {}", painted_path.display());
    println!("report: {}", path.display());
    Ok(())
}

#[derive(clap::Args)]
pub struct CompareArgs {
    /// Reference image.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Image under test.
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

fn run_compare(args: CompareArgs) -> Result<(), CliError> {
    let digest = inputs_digest(&[&args.reference, &args.test])?;
    let mut watch = Stopwatch::start();
    let reference =
        ImageBuffer::load_png(&args.reference).map_err(|e| at_path(&args.reference, e))?;
    let test = ImageBuffer::load_png(&args.test).map_err(|e| at_path(&args.test, e))?;
    watch.lap("load");
    let metrics = image_metrics(&reference, &test)?;
    watch.lap("compute");

    println!("mse {}", metrics.mse);
    println!("mae {}", metrics.mae);
    match metrics.psnr_db {
        Some(db) => println!("psnr_db {db}"),
        None => println!("psnr_db infinite"),
    }
    println!("ssim {}", metrics.ssim);

    let config = serde_json::json!({
        "ref": args.reference,
        "test": args.test,
    });
    let section = ReportSection {
        id: "image-compare".to_string(),
        title: "Image comparison".to_string(),
        config,
        body: SectionBody::ImageComparison { metrics },
    };
    let path = write_run_report(&args.common.out, section, digest, watch)?;
    println!("report: {}", path.display());
    Ok(())
}
