use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate sentence id `{0}`")]
    DuplicateId(String),

    #[error("missing relation file(s) in {dir}: {missing:?}")]
    MissingRelationFiles { dir: PathBuf, missing: Vec<String> },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("vocabulary size {size} leaves no room above {specials} special tokens")]
    VocabTooSmall { size: usize, specials: usize },

    #[error("record `{id}` does not fit in {max_seq_len} tokens without cutting an event")]
    EventTruncated { id: String, max_seq_len: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid span: {0}")]
    Span(String),

    #[error("non-finite activation in encoder layer {layer}")]
    NonFinite { layer: usize },

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("head kind mismatch: expected {expected}, found {found}")]
    HeadMismatch { expected: String, found: String },

    #[error("variant mismatch: {0}")]
    Variant(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
