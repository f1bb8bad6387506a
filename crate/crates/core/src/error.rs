use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("{file}:{line}: {field} = {value} is outside {range}")]
    Range {
        file: String,
        line: usize,
        field: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("referential integrity violated: {}", .offenders.join("; "))]
    Integrity { offenders: Vec<String> },

    #[error("entity `{0}` has no member posts")]
    MissingEntity(String),

    #[error("entity `{entity}`: missing feature {feature}")]
    MissingFeature { entity: String, feature: &'static str },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("polynomial fit failed: {0}")]
    Fit(String),

    #[error("threshold selection needs {needed} inflection(s), found {found:?}")]
    Selection { needed: usize, found: Vec<f64> },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("shape mismatch: expected {expected} columns, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("cannot stratify: class {class} has {count} row(s), need at least 2")]
    Stratification { class: u8, count: usize },

    #[error("AUC undefined: only class {0} present")]
    UndefinedAuc(u8),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("serialization: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse error family, used by the CLI to pick an exit code.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Fit(_)
            | Error::Selection { .. }
            | Error::DegenerateFit(_)
            | Error::UndefinedAuc(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
