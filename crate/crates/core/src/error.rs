use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{malformed} of {total} lines malformed (limit {limit:.0}%), first offending lines: {lines:?}")]
    TooManyMalformed {
        malformed: usize,
        total: usize,
        limit: f64,
        lines: Vec<usize>,
    },

    #[error("format error in {what}: expected {expected}, found {actual}")]
    Format {
        what: String,
        expected: String,
        actual: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no filter decision for comment `{comment_id}` of image `{image_id}`")]
    MissingDecision {
        image_id: String,
        comment_id: String,
    },

    #[error("vocabulary empty: no admissible n-grams in corpus")]
    EmptyVocabulary,

    #[error("hash mismatch for {what}: expected {expected}, found {actual}")]
    HashMismatch {
        what: String,
        expected: String,
        actual: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(
        what: impl Into<String>,
        expected: impl Into<String>,
        actual: impl Into<String>,
    ) -> Self {
        Error::Format {
            what: what.into(),
            expected: expected.into(),
            actual: actual.into(),
        }
    }
}
