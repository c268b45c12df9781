use std::path::PathBuf;

use crate::types::{MentionClass, TaskId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A record could not be decoded. `line` is 1-based.
    #[error("parse error in {source_name} at line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("label {class} is not valid for task {task}")]
    InvalidLabel { task: TaskId, class: MentionClass },

    #[error("label vector is missing task {0}")]
    MissingTask(TaskId),

    #[error("files are misaligned: {0}")]
    Misaligned(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("duplicate record: {0}")]
    Duplicate(String),

    #[error("non-finite loss at batch {batch} (epoch {epoch})")]
    NonFinite { epoch: usize, batch: usize },

    #[error("training and held-out keys overlap ({count} shared, first: {first:?})")]
    HeldoutOverlap { count: usize, first: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
