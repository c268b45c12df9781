use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{MentionClass, SentenceId, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationSource {
    Heldout,
    ActiveRound,
    Adjudication,
}

impl AnnotationSource {
    pub fn as_str(self) -> &'static str {
        match self {
            AnnotationSource::Heldout => "heldout",
            AnnotationSource::ActiveRound => "active_round",
            AnnotationSource::Adjudication => "adjudication",
        }
    }
}

/// One human (or oracle) label for one task of one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub dedup_key: String,
    pub report_id: String,
    pub sentence_index: u32,
    pub task: TaskId,
    pub label: MentionClass,
    pub annotator_id: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub source: AnnotationSource,
}

impl AnnotationRecord {
    pub fn sentence_id(&self) -> SentenceId {
        (self.report_id.clone(), self.sentence_index)
    }

    /// The uniqueness key within a store.
    pub fn key(&self) -> (String, TaskId, String, AnnotationSource) {
        (
            self.dedup_key.clone(),
            self.task,
            self.annotator_id.clone(),
            self.source,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.task.check(self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    PreferA,
    PreferB,
    BothWrong,
    Unsure,
}

impl Verdict {
    pub const ALL: [Verdict; 4] = [
        Verdict::PreferA,
        Verdict::PreferB,
        Verdict::BothWrong,
        Verdict::Unsure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::PreferA => "prefer_a",
            Verdict::PreferB => "prefer_b",
            Verdict::BothWrong => "both_wrong",
            Verdict::Unsure => "unsure",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Verdict::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown verdict {s:?}")))
    }
}

/// A blinded preference between two labels for one (sentence, task).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationRecord {
    pub dedup_key: String,
    pub task: TaskId,
    pub verdict: Verdict,
    pub annotator_id: String,
    pub blinding_id: String,
}

impl AdjudicationRecord {
    pub fn key(&self) -> (String, String) {
        (self.blinding_id.clone(), self.annotator_id.clone())
    }
}
