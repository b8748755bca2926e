//! Optional JSON defaults file: one flat object whose keys mirror the long
//! flags. Explicit flags always win; keys absent from both fall back to
//! built-in defaults. Unknown keys are rejected so typos cannot silently
//! revert a parameter to its default.

use std::path::Path;

use serde::Deserialize;

use crate::errors::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub target: Option<String>,
    pub conditioning: Option<Vec<String>>,
    pub layer: Option<usize>,
    pub folds: Option<usize>,
    pub lambda: Option<f64>,
    pub perms: Option<usize>,
    pub seed: Option<u64>,
    pub eps: Option<f64>,
    pub smax: Option<f64>,
    pub pairs: Option<usize>,
    pub epsilon_ppl: Option<f64>,
    pub reduce_dim: Option<usize>,
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    pub perplexity: Option<f64>,
    pub iterations: Option<usize>,
    pub learning_rate: Option<f64>,
    pub exaggeration: Option<f64>,
    pub exaggeration_iters: Option<usize>,
    pub pca_dims: Option<usize>,
    pub dim: Option<usize>,
    pub generator: Option<String>,
}

impl FileConfig {
    /// Loads the file if one was named; no `--config` means an empty config.
    pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::from_json(path, e))
    }
}
