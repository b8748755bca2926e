//! One module per subcommand group.

pub mod analyze;
pub mod image;
pub mod metrics;
pub mod render;
pub mod study;
pub mod synth;

use std::path::PathBuf;

use crate::config::FileConfig;
use crate::errors::CliError;

/// Flags every run-producing subcommand shares.
#[derive(clap::Args)]
pub struct CommonArgs {
    /// Output directory for report.json and side files.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// JSON file of fallback parameter values; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl CommonArgs {
    pub fn file_config(&self) -> Result<FileConfig, CliError> {
        FileConfig::load(self.config.as_deref())
    }
}
