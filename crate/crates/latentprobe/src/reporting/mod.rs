//! Unified analysis-report assembly and SVG chart emission.
//!
//! A report bundles every analysis a run produced: per-layer MI profiles,
//! gloss-axis fits, layer-importance tables, embeddings, image metrics, and
//! study statistics. Each section echoes the full configuration (seeds
//! included) that recomputes it. Serialization is deterministic: the only
//! volatile data (timestamp and wall-clock timings) lives in the `run_meta`
//! subtree, so masking that one key makes reruns byte-comparable.

mod svg;
#[cfg(test)]
mod tests;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::factoraxis::{GlossAxisModel, LayerImportanceTable};
use crate::genmetrics::RankProduct;
use crate::infotheory::MiProfile;
use crate::nprimaging::ImageMetrics;

/// Schema tag written into every report.
pub const REPORT_SCHEMA: &str = "latentprobe-report-v1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("a report needs at least one section")]
    Empty,
    #[error("duplicate section id {0:?}")]
    DuplicateSection(String),
    #[error("section id {0:?} must be lowercase alphanumerics, '-' or '_'")]
    BadSectionId(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("report serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// Volatile run metadata, the one subtree excluded from determinism checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    /// RFC 3339 creation time.
    pub created_at: String,
    /// Wall-clock duration of each pipeline stage.
    pub timings_ms: BTreeMap<String, u64>,
}

/// One scatter point of a gloss-axis projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlossPoint {
    pub projection: f64,
    pub gloss: u32,
}

/// One 2-D embedding point with an optional class label for coloring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPoint {
    pub x: f64,
    pub y: f64,
    pub label: Option<u32>,
}

/// The payload of one report section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SectionBody {
    MiProfile {
        profile: MiProfile,
    },
    GlossAxis {
        model: GlossAxisModel,
        projections: Vec<GlossPoint>,
    },
    LayerImportance {
        table: LayerImportanceTable,
    },
    Tsne {
        points: Vec<EmbeddingPoint>,
        kl_checkpoints: Vec<f64>,
    },
    ImageComparison {
        metrics: ImageMetrics,
    },
    Scalars {
        values: BTreeMap<String, f64>,
    },
    Study {
        rank_products: Vec<RankProduct>,
        preferences: BTreeMap<String, f64>,
    },
}

/// One analysis result plus the configuration echo that reproduces it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSection {
    /// Stable identifier; also the stem of the section's SVG file.
    pub id: String,
    pub title: String,
    /// Full resolved configuration, seeds included.
    pub config: serde_json::Value,
    pub body: SectionBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema: String,
    pub tool_version: String,
    /// `sha256:<hex>` over the primary input.
    pub input_digest: String,
    pub run_meta: RunMeta,
    pub sections: Vec<ReportSection>,
}

fn valid_section_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
}

/// Bundles sections into a report, stamping version, digest, and timings.
///
/// Section ids become file stems, so they are restricted to lowercase
/// alphanumerics plus `-` and `_`, and must be unique.
pub fn assemble_report(
    sections: Vec<ReportSection>,
    input_digest: String,
    timings_ms: BTreeMap<String, u64>,
) -> Result<AnalysisReport, ReportError> {
    if sections.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut seen = std::collections::BTreeSet::new();
    for section in &sections {
        if !valid_section_id(&section.id) {
            return Err(ReportError::BadSectionId(section.id.clone()));
        }
        if !seen.insert(section.id.clone()) {
            return Err(ReportError::DuplicateSection(section.id.clone()));
        }
    }
    Ok(AnalysisReport {
        schema: REPORT_SCHEMA.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        input_digest,
        run_meta: RunMeta {
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            timings_ms,
        },
        sections,
    })
}

/// The canonical serialized form: pretty JSON with a trailing newline.
/// Struct fields serialize in declaration order and all maps are sorted,
/// so equal reports give byte-equal text.
pub fn report_json(report: &AnalysisReport) -> Result<String, ReportError> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

pub fn write_report(report: &AnalysisReport, path: &Path) -> Result<(), ReportError> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(report_json(report)?.as_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn load_report(path: &Path) -> Result<AnalysisReport, ReportError> {
    let reader = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(reader)?)
}

/// `sha256:<hex>` of a byte string.
pub fn digest_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("sha256:{:x}", hasher.finalize())
}

/// `sha256:<hex>` of a file's contents, streamed.
pub fn digest_file(path: &Path) -> Result<String, ReportError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("sha256:{:x}", hasher.finalize()))
}

/// Writes one SVG per plottable section into `dir` and returns the paths
/// in section order.
///
/// Per-layer profiles render as bar charts; embeddings and gloss
/// projections render as scatter plots. Sections without a chart form
/// (image metrics, scalars, study tables) are skipped. Output is a pure
/// function of the report: scatter jitter is seeded from the section id.
pub fn emit_plots(report: &AnalysisReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let mut files = Vec::new();
    for section in &report.sections {
        let rendered = match &section.body {
            SectionBody::MiProfile { profile } => {
                let labels: Vec<String> =
                    profile.layers.iter().map(|l| l.layer.to_string()).collect();
                let values: Vec<f64> = profile.layers.iter().map(|l| l.mi.corrected_bits).collect();
                Some(svg::bar_chart(&section.title, &labels, &values, "bits"))
            }
            SectionBody::LayerImportance { table } => {
                let labels: Vec<String> =
                    table.layers.iter().map(|l| l.layer.to_string()).collect();
                let values: Vec<f64> = table.layers.iter().map(|l| l.delta_r2_mean).collect();
                Some(svg::bar_chart(&section.title, &labels, &values, "delta r2"))
            }
            SectionBody::Tsne { points, .. } => {
                let pts: Vec<(f64, f64, usize)> = points
                    .iter()
                    .map(|p| (p.x, p.y, p.label.unwrap_or(0) as usize))
                    .collect();
                Some(svg::scatter(&section.title, &pts, "dim 1", "dim 2"))
            }
            SectionBody::GlossAxis { projections, .. } => {
                Some(svg::jittered_scatter(
                    &section.title,
                    projections,
                    &section.id,
                ))
            }
            SectionBody::ImageComparison { .. }
            | SectionBody::Scalars { .. }
            | SectionBody::Study { .. } => None,
        };
        if let Some(svg_text) = rendered {
            let path = dir.join(format!("{}.svg", section.id));
            std::fs::write(&path, svg_text)?;
            files.push(path);
        }
    }
    Ok(files)
}
