//! Silver-label distillation toolkit.
//!
//! A rule-based teacher ([`rules`]) labels report sentences for 14 tasks;
//! a hashed n-gram neural student ([`surrogate`]) is distilled from it and
//! yields per-task probabilities; [`active`] uses those probabilities to
//! pick sentences for human annotation and fine-tunes the student on them;
//! [`eval`] measures parity and gold accuracy. [`corpus`] generates
//! synthetic reports with exact gold labels and ingests real ones.

pub mod active;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod io;
pub mod rules;
pub mod surrogate;
pub mod tokenize;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    normalize_sentence, LabelRecord, LabelVector, MentionClass, PartialLabelVector, ProbRecord,
    SentenceId, SentenceRecord, TaskId, N_TASKS,
};
