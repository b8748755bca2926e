//! Error type carrying the exit-code split.
//!
//! Exit 1 covers invalid requests: flags, config values, or preconditions
//! the chosen inputs cannot meet. Exit 2 covers file trouble: anything
//! missing, unreadable, unwritable, or not a valid instance of its format.

use std::fmt;
use std::path::Path;

use latentprobe::corpus::CorpusError;
use latentprobe::embedviz::TsneError;
use latentprobe::factoraxis::AxisError;
use latentprobe::genmetrics::MetricsError;
use latentprobe::infotheory::MiError;
use latentprobe::nprimaging::ImagingError;
use latentprobe::reporting::ReportError;

#[derive(Debug)]
pub enum CliError {
    /// The invocation asked for something invalid; exit 1.
    Validation(String),
    /// A file could not be read, decoded, or written; exit 2.
    Io(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> CliError {
        CliError::Validation(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> CliError {
        CliError::Io(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    /// serde_json conflates syntax and semantics; split on its category so
    /// an undecodable file exits 2 while a value problem exits 1.
    pub fn from_json(path: &Path, e: serde_json::Error) -> CliError {
        let msg = format!("{}: {e}", path.display());
        match e.classify() {
            serde_json::error::Category::Data => CliError::Validation(msg),
            _ => CliError::Io(msg),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

/// Prefixes the message with the file it concerns, keeping the class.
pub fn at_path<E: Into<CliError>>(path: &Path, e: E) -> CliError {
    match e.into() {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> CliError {
        match e {
            // Bad requests against a healthy corpus.
            CorpusError::UnknownFactor(_)
            | CorpusError::LayerOutOfRange { .. }
            | CorpusError::BadSpec(_) => CliError::Validation(e.to_string()),
            // Everything else means the stored corpus itself is unusable.
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<MiError> for CliError {
    fn from(e: MiError) -> CliError {
        CliError::Validation(e.to_string())
    }
}

impl From<AxisError> for CliError {
    fn from(e: AxisError) -> CliError {
        CliError::Validation(e.to_string())
    }
}

impl From<TsneError> for CliError {
    fn from(e: TsneError) -> CliError {
        CliError::Validation(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> CliError {
        match e {
            MetricsError::Csv(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ImagingError> for CliError {
    fn from(e: ImagingError) -> CliError {
        match e {
            ImagingError::Io(_) | ImagingError::Png(_) | ImagingError::BadMapFile(_) => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> CliError {
        match e {
            ReportError::Io(_) | ReportError::Json(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}
