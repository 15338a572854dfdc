use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("too many malformed lines: {malformed} of {total}")]
    MalformedCorpus { malformed: usize, total: usize },

    #[error("no trainable vocabulary after min-count filtering")]
    NoTrainableVocab,

    #[error("empty effective seed set: no seed word is in the vocabulary")]
    EmptySeedSet,

    #[error("failed to converge after {0} iterations")]
    NoConvergence(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
