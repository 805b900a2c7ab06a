use std::path::PathBuf;

use thiserror::Error;

use crate::map::GridDims;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Io,
    Metric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(
        "malformed grid file{}: {reason} (byte offset {offset})",
        display_path(path)
    )]
    Format {
        path: Option<PathBuf>,
        offset: u64,
        reason: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: GridDims, found: GridDims },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("invalid JSON in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid configuration in {}: {reason}", path.display())]
    Config { path: PathBuf, reason: String },

    #[error("map has zero mass")]
    ZeroMass,

    #[error("correlation undefined for a constant map")]
    ConstantMap,

    #[error("provider `{provider}` failed: {source}")]
    Provider {
        provider: String,
        #[source]
        source: Box<Error>,
    },

    #[error("clip {clip_id}: {source}")]
    Clip {
        clip_id: String,
        #[source]
        source: Box<Error>,
    },
}

fn display_path(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!(" {}", p.display()),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn in_clip(self, clip_id: &str) -> Self {
        Error::Clip {
            clip_id: clip_id.to_owned(),
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::ZeroMass | Error::ConstantMap => ErrorClass::Metric,
            Error::Provider { source, .. } | Error::Clip { source, .. } => source.class(),
            Error::Format { .. }
            | Error::DimMismatch { .. }
            | Error::Invalid(_)
            | Error::Json { .. }
            | Error::Config { .. } => ErrorClass::Validation,
        }
    }
}
