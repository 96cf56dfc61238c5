use std::path::PathBuf;

use crate::corpus::Split;
use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: unknown label {label:?} (expected one of {expected:?})")]
    UnknownLabel {
        line: usize,
        label: String,
        expected: Vec<String>,
    },
    #[error("line {line}: text already appears in the {first:?} split, now in {second:?}")]
    SplitOverlap {
        line: usize,
        first: Split,
        second: Split,
    },
    #[error("{0:?} split is empty")]
    EmptySplit(Split),
    #[error("invalid class set: {0}")]
    ClassSet(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenOutOfVocab { id: usize, size: usize },
    #[error("empty input sequence")]
    EmptySequence,
    #[error("class name {0:?} produces no tokens")]
    EmptyClassName(String),
    #[error("training diverged at epoch {epoch}: non-finite {what}")]
    Diverged { epoch: usize, what: &'static str },
    #[error("subset size {size} exceeds the {available} training examples of group {group:?}")]
    SubsetTooLarge {
        group: String,
        size: usize,
        available: usize,
    },
    #[error("subset sizes must be non-decreasing")]
    SubsetOrder,
    #[error("{actual} predictions supplied for {expected} test examples")]
    MissingPredictions { expected: usize, actual: usize },
    #[error("group {0:?} has no training examples")]
    EmptyGroup(String),
    #[error("nothing to aggregate")]
    NoGroups,
    #[error("group sets differ: {0}")]
    GroupMismatch(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("run seed={seed} mode={mode}: {source}")]
    Run {
        seed: u64,
        mode: String,
        #[source]
        source: Box<Error>,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
