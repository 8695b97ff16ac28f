use std::path::PathBuf;

use crate::domain::{Area, Stratum, StudyYear};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("duplicate record id {id:?} at row {row}")]
    DuplicateId { id: String, row: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("area is missing where a known area is required (record {0})")]
    MissingArea(String),

    #[error("no smoking coefficients for stratum {0}")]
    MissingStratum(Stratum),

    #[error("area {area} is not part of the {year} wave")]
    AreaNotInWave { area: Area, year: StudyYear },

    #[error("stratum {0} has no eligible persons")]
    EmptyStratum(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("initial point has non-finite log density in block {block}")]
    BadInitialPoint { block: String },

    #[error("{0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
