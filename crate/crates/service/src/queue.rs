use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;
use silverloop_core::active::{AnnotationSource, Heldout, Selection, Verdict};
use silverloop_core::eval::AdjudicationItem;
use silverloop_core::{MentionClass, SentenceId, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Label,
    Adjudicate,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "label" => Ok(Mode::Label),
            "adjudicate" => Ok(Mode::Adjudicate),
            _ => Err(format!("unknown mode {s:?}")),
        }
    }
}

/// One (sentence, task) waiting for a label.
#[derive(Debug, Clone)]
pub struct LabelItem {
    pub item_id: String,
    pub dedup_key: String,
    pub report_id: String,
    pub sentence_index: u32,
    pub text: String,
    pub task: TaskId,
    pub source: AnnotationSource,
}

impl LabelItem {
    pub fn sentence_id(&self) -> SentenceId {
        (self.report_id.clone(), self.sentence_index)
    }

    pub fn answer_key(&self, annotator: &str) -> (String, TaskId, String, AnnotationSource) {
        (self.dedup_key.clone(), self.task, annotator.to_string(), self.source)
    }
}

/// What the client sees. Adjudication items carry the two labels in the
/// order the queue file fixed and nothing about where they came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueItem {
    pub item_id: String,
    pub dedup_key: String,
    pub text: String,
    pub task: TaskId,
    pub mode: Mode,
    pub choices: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_a: Option<MentionClass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_b: Option<MentionClass>,
}

impl From<&LabelItem> for QueueItem {
    fn from(item: &LabelItem) -> Self {
        QueueItem {
            item_id: item.item_id.clone(),
            dedup_key: item.dedup_key.clone(),
            text: item.text.clone(),
            task: item.task,
            mode: Mode::Label,
            choices: item.task.classes().iter().map(|c| c.as_str().to_string()).collect(),
            label_a: None,
            label_b: None,
        }
    }
}

impl From<&AdjudicationItem> for QueueItem {
    fn from(item: &AdjudicationItem) -> Self {
        QueueItem {
            item_id: item.blinding_id.clone(),
            dedup_key: item.dedup_key.clone(),
            text: item.text.clone(),
            task: item.task,
            mode: Mode::Adjudicate,
            choices: Verdict::ALL.iter().map(|v| v.as_str().to_string()).collect(),
            label_a: Some(item.label_a),
            label_b: Some(item.label_b),
        }
    }
}

/// The fixed work lists. Held-out items come first, then the uncertainty
/// selection in its ranked order.
#[derive(Debug, Default)]
pub struct Queues {
    pub label: Vec<LabelItem>,
    pub adjudicate: Vec<AdjudicationItem>,
    label_index: HashMap<String, usize>,
    adjudicate_index: HashMap<String, usize>,
}

fn label_id(source: AnnotationSource, report_id: &str, index: u32, task: TaskId) -> String {
    let prefix = match source {
        AnnotationSource::Heldout => "h",
        AnnotationSource::ActiveRound => "s",
        AnnotationSource::Adjudication => "j",
    };
    format!("{prefix}:{report_id}:{index}:{task}")
}

impl Queues {
    pub fn new(
        heldout: Option<&Heldout>,
        selection: Option<&Selection>,
        adjudicate: Vec<AdjudicationItem>,
    ) -> Self {
        let mut label = Vec::new();
        for t in heldout.map_or(&[][..], |h| &h.tasks) {
            label.push(LabelItem {
                item_id: label_id(AnnotationSource::Heldout, &t.report_id, t.sentence_index, t.task),
                dedup_key: t.dedup_key.clone(),
                report_id: t.report_id.clone(),
                sentence_index: t.sentence_index,
                text: t.text.clone(),
                task: t.task,
                source: AnnotationSource::Heldout,
            });
        }
        for s in selection.map_or(&[][..], |s| &s.items) {
            for &task in &s.requested_by {
                label.push(LabelItem {
                    item_id: label_id(AnnotationSource::ActiveRound, &s.report_id, s.sentence_index, task),
                    dedup_key: s.dedup_key.clone(),
                    report_id: s.report_id.clone(),
                    sentence_index: s.sentence_index,
                    text: s.text.clone(),
                    task,
                    source: AnnotationSource::ActiveRound,
                });
            }
        }
        let mut seen = HashSet::new();
        label.retain(|i| seen.insert(i.item_id.clone()));
        let mut seen = HashSet::new();
        let adjudicate: Vec<AdjudicationItem> = adjudicate
            .into_iter()
            .filter(|i| seen.insert(i.blinding_id.clone()))
            .collect();
        let label_index = label.iter().enumerate().map(|(i, l)| (l.item_id.clone(), i)).collect();
        let adjudicate_index = adjudicate
            .iter()
            .enumerate()
            .map(|(i, a)| (a.blinding_id.clone(), i))
            .collect();
        Queues {
            label,
            adjudicate,
            label_index,
            adjudicate_index,
        }
    }

    pub fn label_item(&self, id: &str) -> Option<&LabelItem> {
        self.label_index.get(id).map(|&i| &self.label[i])
    }

    pub fn adjudication_item(&self, id: &str) -> Option<&AdjudicationItem> {
        self.adjudicate_index.get(id).map(|&i| &self.adjudicate[i])
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Depth {
    pub total: usize,
    pub answered: usize,
    pub remaining: usize,
}

impl Depth {
    fn add(&mut self, answered: bool) {
        self.total += 1;
        if answered {
            self.answered += 1;
        } else {
            self.remaining += 1;
        }
    }
}

pub type Depths = BTreeMap<Mode, BTreeMap<TaskId, Depth>>;

/// Per mode and task, how many items exist and how many are answered,
/// either by `annotator` or, without one, by anybody.
pub fn depths(queues: &Queues, snap: &crate::Snapshot, annotator: Option<&str>) -> Depths {
    let mut out: Depths = BTreeMap::new();
    let label = out.entry(Mode::Label).or_default();
    for item in &queues.label {
        let answered = match annotator {
            Some(a) => snap.has_label(&item.answer_key(a)),
            None => snap.label_answered_by_anyone(item),
        };
        label.entry(item.task).or_default().add(answered);
    }
    let adjudicate = out.entry(Mode::Adjudicate).or_default();
    for item in &queues.adjudicate {
        let answered = match annotator {
            Some(a) => snap.has_verdict(&item.blinding_id, a),
            None => snap.verdict_by_anyone(&item.blinding_id),
        };
        adjudicate.entry(item.task).or_default().add(answered);
    }
    out
}
