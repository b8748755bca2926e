//! Scaffolding shared by every run: phase timings, input digests, and the
//! one-report-per-run writing convention.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use latentprobe::reporting::{
    assemble_report, digest_bytes, digest_file, write_report, ReportSection,
};

use crate::errors::{at_path, CliError};

/// Wall-clock phase timer. The laps land under `run_meta`, the report's one
/// volatile subtree, so they never participate in determinism checks.
pub struct Stopwatch {
    last: Instant,
    laps: BTreeMap<String, u64>,
}

impl Stopwatch {
    pub fn start() -> Stopwatch {
        Stopwatch {
            last: Instant::now(),
            laps: BTreeMap::new(),
        }
    }

    /// Closes the current phase, recording its duration in milliseconds.
    /// Repeated names accumulate, so loop bodies can share one label.
    pub fn lap(&mut self, name: &str) {
        let now = Instant::now();
        let ms = now.duration_since(self.last).as_millis() as u64;
        *self.laps.entry(name.to_string()).or_insert(0) += ms;
        self.last = now;
    }

    fn into_timings(self) -> BTreeMap<String, u64> {
        self.laps
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))
}

/// Digest over the named input files. Each file is hashed separately and a
/// multi-file run is stamped with the hash of the newline-joined digests.
pub fn inputs_digest(paths: &[&Path]) -> Result<String, CliError> {
    let mut parts = Vec::with_capacity(paths.len());
    for path in paths {
        parts.push(digest_file(path).map_err(|e| at_path(path, e))?);
    }
    Ok(if parts.len() == 1 {
        parts.remove(0)
    } else {
        digest_bytes(parts.join("\n").as_bytes())
    })
}

/// Hashes a corpus as stored: the manifest plus the embeddings and labels
/// files it names, so any byte change in the corpus changes the digest.
pub fn corpus_digest(path: &Path) -> Result<String, CliError> {
    let manifest = if path.is_dir() {
        path.join("manifest.json")
    } else {
        path.to_path_buf()
    };
    let text = std::fs::read_to_string(&manifest)
        .map_err(|e| CliError::io(format!("{}: {e}", manifest.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::from_json(&manifest, e))?;
    let base = manifest.parent().map(Path::to_path_buf).unwrap_or_default();

    let mut files = vec![manifest.clone()];
    for key in ["embeddings", "labels"] {
        if let Some(name) = value.get(key).and_then(|v| v.as_str()) {
            files.push(base.join(name));
        }
    }
    let refs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
    inputs_digest(&refs)
}

/// Digest stamped on runs that read no files: the resolved config itself.
pub fn config_digest(config: &serde_json::Value) -> String {
    digest_bytes(config.to_string().as_bytes())
}

/// Assembles the single-section report for this run and writes it to
/// `report.json` under `out`, returning the written path.
pub fn write_run_report(
    out: &Path,
    section: ReportSection,
    input_digest: String,
    watch: Stopwatch,
) -> Result<PathBuf, CliError> {
    ensure_dir(out)?;
    let report = assemble_report(vec![section], input_digest, watch.into_timings())?;
    let path = out.join("report.json");
    write_report(&report, &path).map_err(|e| at_path(&path, e))?;
    Ok(path)
}
