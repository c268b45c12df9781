//! Shared domain vocabulary: tasks, mention classes, sentences and label vectors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the 14 labeling tasks, in canonical (report table) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    NoFinding,
    EnlargedCardiomediastinum,
    Cardiomegaly,
    LungLesion,
    AirspaceOpacity,
    Edema,
    Consolidation,
    Pneumonia,
    Atelectasis,
    Pneumothorax,
    PleuralEffusion,
    PleuralOther,
    Fracture,
    SupportDevices,
}

pub const N_TASKS: usize = 14;

impl TaskId {
    pub const ALL: [TaskId; N_TASKS] = [
        TaskId::NoFinding,
        TaskId::EnlargedCardiomediastinum,
        TaskId::Cardiomegaly,
        TaskId::LungLesion,
        TaskId::AirspaceOpacity,
        TaskId::Edema,
        TaskId::Consolidation,
        TaskId::Pneumonia,
        TaskId::Atelectasis,
        TaskId::Pneumothorax,
        TaskId::PleuralEffusion,
        TaskId::PleuralOther,
        TaskId::Fracture,
        TaskId::SupportDevices,
    ];

    /// The 13 tasks that carry their own mention lexicon.
    pub fn findings() -> impl Iterator<Item = TaskId> {
        Self::ALL.into_iter().filter(|t| *t != TaskId::NoFinding)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::NoFinding => "no_finding",
            TaskId::EnlargedCardiomediastinum => "enlarged_cardiomediastinum",
            TaskId::Cardiomegaly => "cardiomegaly",
            TaskId::LungLesion => "lung_lesion",
            TaskId::AirspaceOpacity => "airspace_opacity",
            TaskId::Edema => "edema",
            TaskId::Consolidation => "consolidation",
            TaskId::Pneumonia => "pneumonia",
            TaskId::Atelectasis => "atelectasis",
            TaskId::Pneumothorax => "pneumothorax",
            TaskId::PleuralEffusion => "pleural_effusion",
            TaskId::PleuralOther => "pleural_other",
            TaskId::Fracture => "fracture",
            TaskId::SupportDevices => "support_devices",
        }
    }

    /// Human-readable name used in rendered tables.
    pub fn display_name(self) -> &'static str {
        match self {
            TaskId::NoFinding => "No Finding",
            TaskId::EnlargedCardiomediastinum => "Enlarged Cardiomediastinum",
            TaskId::Cardiomegaly => "Cardiomegaly",
            TaskId::LungLesion => "Lung Lesion",
            TaskId::AirspaceOpacity => "Airspace Opacity",
            TaskId::Edema => "Edema",
            TaskId::Consolidation => "Consolidation",
            TaskId::Pneumonia => "Pneumonia",
            TaskId::Atelectasis => "Atelectasis",
            TaskId::Pneumothorax => "Pneumothorax",
            TaskId::PleuralEffusion => "Pleural Effusion",
            TaskId::PleuralOther => "Pleural Other",
            TaskId::Fracture => "Fracture",
            TaskId::SupportDevices => "Support Devices",
        }
    }

    /// Classes this task may take, in ordinal order.
    pub fn classes(self) -> &'static [MentionClass] {
        match self {
            TaskId::NoFinding => &[MentionClass::Negative, MentionClass::Positive],
            _ => &MentionClass::ALL,
        }
    }

    pub fn n_classes(self) -> usize {
        self.classes().len()
    }

    pub fn accepts(self, class: MentionClass) -> bool {
        self.classes().contains(&class)
    }

    /// Position of `class` within [`TaskId::classes`], i.e. the output
    /// unit of this task's classification head.
    pub fn class_slot(self, class: MentionClass) -> Option<usize> {
        self.classes().iter().position(|c| *c == class)
    }

    pub fn check(self, class: MentionClass) -> Result<()> {
        if self.accepts(class) {
            Ok(())
        } else {
            Err(Error::InvalidLabel { task: self, class })
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown task {s:?}")))
    }
}

/// Mention class. The declaration order is the pinned ordinal used for
/// argmax tie-breaking and for merge precedence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionClass {
    NoMention,
    Negative,
    Uncertain,
    Positive,
}

impl MentionClass {
    pub const ALL: [MentionClass; 4] = [
        MentionClass::NoMention,
        MentionClass::Negative,
        MentionClass::Uncertain,
        MentionClass::Positive,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MentionClass::NoMention => "no_mention",
            MentionClass::Negative => "negative",
            MentionClass::Uncertain => "uncertain",
            MentionClass::Positive => "positive",
        }
    }
}

impl fmt::Display for MentionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MentionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MentionClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown mention class {s:?}")))
    }
}

/// Dedup key: lowercased, whitespace-collapsed, terminal `.!?;` stripped.
/// Internal punctuation is kept.
pub fn normalize_sentence(text: &str) -> String {
    let mut key = text
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ");
    loop {
        let trimmed = key.trim_end().len();
        key.truncate(trimmed);
        match key.chars().last() {
            Some('.' | '!' | '?' | ';') => {
                key.pop();
            }
            _ => break,
        }
    }
    key
}

/// (report_id, sentence_index): the alignment key of every per-sentence file.
pub type SentenceId = (String, u32);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "RawSentence", into = "RawSentence")]
pub struct SentenceRecord {
    pub report_id: String,
    pub sentence_index: u32,
    pub text: String,
    dedup_key: String,
}

#[derive(Serialize, Deserialize)]
struct RawSentence {
    report_id: String,
    sentence_index: u32,
    text: String,
}

impl From<RawSentence> for SentenceRecord {
    fn from(raw: RawSentence) -> Self {
        SentenceRecord::new(raw.report_id, raw.sentence_index, raw.text)
    }
}

impl From<SentenceRecord> for RawSentence {
    fn from(rec: SentenceRecord) -> Self {
        RawSentence {
            report_id: rec.report_id,
            sentence_index: rec.sentence_index,
            text: rec.text,
        }
    }
}

impl SentenceRecord {
    pub fn new(report_id: impl Into<String>, sentence_index: u32, text: impl Into<String>) -> Self {
        let text = text.into();
        SentenceRecord {
            report_id: report_id.into(),
            sentence_index,
            dedup_key: normalize_sentence(&text),
            text,
        }
    }

    pub fn dedup_key(&self) -> &str {
        &self.dedup_key
    }

    pub fn id(&self) -> SentenceId {
        (self.report_id.clone(), self.sentence_index)
    }
}

/// A total assignment of one mention class to each of the 14 tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(
    try_from = "BTreeMap<TaskId, MentionClass>",
    into = "BTreeMap<TaskId, MentionClass>"
)]
pub struct LabelVector([MentionClass; N_TASKS]);

impl LabelVector {
    pub fn from_array(labels: [MentionClass; N_TASKS]) -> Result<Self> {
        for task in TaskId::ALL {
            task.check(labels[task.index()])?;
        }
        Ok(LabelVector(labels))
    }

    /// Every finding `no_mention`, `no_finding` positive.
    pub fn empty() -> Self {
        let mut labels = [MentionClass::NoMention; N_TASKS];
        labels[TaskId::NoFinding.index()] = MentionClass::Positive;
        LabelVector(labels)
    }

    /// Builds a vector from the 13 finding labels, deriving `no_finding`:
    /// positive iff no finding is uncertain or positive.
    pub fn from_findings(findings: impl Fn(TaskId) -> MentionClass) -> Self {
        let mut labels = [MentionClass::NoMention; N_TASKS];
        let mut any_finding = false;
        for task in TaskId::findings() {
            let class = findings(task);
            any_finding |= class >= MentionClass::Uncertain;
            labels[task.index()] = class;
        }
        labels[TaskId::NoFinding.index()] = if any_finding {
            MentionClass::Negative
        } else {
            MentionClass::Positive
        };
        LabelVector(labels)
    }

    pub fn get(&self, task: TaskId) -> MentionClass {
        self.0[task.index()]
    }

    pub fn set(&mut self, task: TaskId, class: MentionClass) -> Result<()> {
        task.check(class)?;
        self.0[task.index()] = class;
        Ok(())
    }

    pub fn as_array(&self) -> &[MentionClass; N_TASKS] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (TaskId, MentionClass)> + '_ {
        TaskId::ALL.into_iter().map(move |t| (t, self.get(t)))
    }

    pub fn to_partial(&self) -> PartialLabelVector {
        PartialLabelVector(self.iter().collect())
    }
}

impl TryFrom<BTreeMap<TaskId, MentionClass>> for LabelVector {
    type Error = Error;

    fn try_from(map: BTreeMap<TaskId, MentionClass>) -> Result<Self> {
        let mut labels = [MentionClass::NoMention; N_TASKS];
        for task in TaskId::ALL {
            labels[task.index()] = *map.get(&task).ok_or(Error::MissingTask(task))?;
        }
        LabelVector::from_array(labels)
    }
}

impl From<LabelVector> for BTreeMap<TaskId, MentionClass> {
    fn from(v: LabelVector) -> Self {
        v.iter().collect()
    }
}

/// Labels for any subset of tasks (human annotations are per task).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<TaskId, MentionClass>")]
pub struct PartialLabelVector(BTreeMap<TaskId, MentionClass>);

impl PartialLabelVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, task: TaskId, class: MentionClass) -> Result<()> {
        task.check(class)?;
        self.0.insert(task, class);
        Ok(())
    }

    pub fn get(&self, task: TaskId) -> Option<MentionClass> {
        self.0.get(&task).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TaskId, MentionClass)> + '_ {
        self.0.iter().map(|(t, c)| (*t, *c))
    }

    /// Same as [`insert`](Self::insert) but skips the validity check; the
    /// model layer uses it to surface invalid labels as loss errors.
    #[doc(hidden)]
    pub fn insert_unchecked(&mut self, task: TaskId, class: MentionClass) {
        self.0.insert(task, class);
    }
}

impl TryFrom<BTreeMap<TaskId, MentionClass>> for PartialLabelVector {
    type Error = Error;

    fn try_from(map: BTreeMap<TaskId, MentionClass>) -> Result<Self> {
        for (task, class) in &map {
            task.check(*class)?;
        }
        Ok(PartialLabelVector(map))
    }
}

impl FromIterator<(TaskId, MentionClass)> for PartialLabelVector {
    /// Panics on a label that is invalid for its task.
    fn from_iter<I: IntoIterator<Item = (TaskId, MentionClass)>>(iter: I) -> Self {
        let mut v = PartialLabelVector::new();
        for (t, c) in iter {
            v.insert(t, c).expect("invalid label for task");
        }
        v
    }
}

/// One line of a labels file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub report_id: String,
    pub sentence_index: u32,
    pub labels: LabelVector,
}

impl LabelRecord {
    pub fn id(&self) -> SentenceId {
        (self.report_id.clone(), self.sentence_index)
    }
}

/// One line of a probabilities file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbRecord {
    pub report_id: String,
    pub sentence_index: u32,
    pub probs: BTreeMap<TaskId, Vec<f64>>,
}

impl ProbRecord {
    pub fn id(&self) -> SentenceId {
        (self.report_id.clone(), self.sentence_index)
    }
}
