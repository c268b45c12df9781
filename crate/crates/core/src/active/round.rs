use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::records::{AnnotationRecord, AnnotationSource};
use super::select::{select_uncertain, SelectedItem, DEFAULT_K_PER_TASK};
use super::store::AnnotationStore;
use super::uncertainty::UncertaintyMeasure;
use crate::error::{Error, Result};
use crate::eval::{gold_accuracy, GoldComparison};
use crate::surrogate::{
    fine_tune, mix_teacher, predict_corpus, predict_text, Checkpoint, EpochLog, Example, TrainConfig,
};
use crate::types::{LabelRecord, MentionClass, PartialLabelVector, SentenceId, SentenceRecord, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundConfig {
    pub train: TrainConfig,
    /// Teacher-labelled examples added per annotated sentence.
    pub mix_teacher: f64,
    pub k_per_task: usize,
    pub measure: UncertaintyMeasure,
}

impl Default for RoundConfig {
    fn default() -> Self {
        RoundConfig {
            train: TrainConfig::fine_tune(),
            mix_teacher: 0.0,
            k_per_task: DEFAULT_K_PER_TASK,
            measure: UncertaintyMeasure::Entropy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub schema_version: u32,
    pub n_annotations: usize,
    pub n_sentences: usize,
    pub n_teacher_examples: usize,
    /// Teacher, student before and after, on the held-out gold labels.
    pub comparison: GoldComparison,
    pub log: Vec<EpochLog>,
}

impl RoundReport {
    pub fn raw_macro(&self) -> f64 {
        self.comparison.systems[0].1.macro_accuracy
    }

    pub fn post_macro(&self) -> f64 {
        self.comparison.systems[1].1.macro_accuracy
    }

    pub fn teacher_macro(&self) -> f64 {
        self.comparison.teacher.macro_accuracy
    }
}

pub struct RoundInputs<'a> {
    /// Every sentence referenced by an annotation, plus the teacher pool
    /// for mixing.
    pub corpus: &'a [SentenceRecord],
    pub teacher: &'a [LabelRecord],
    pub checkpoint: &'a Checkpoint,
    pub annotations: &'a [AnnotationRecord],
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Groups `active_round` annotations by sentence into training examples;
/// the last label given for a task wins.
pub fn annotation_examples(
    annotations: &[AnnotationRecord],
    text_of: &HashMap<SentenceId, &SentenceRecord>,
) -> Result<Vec<Example>> {
    let mut grouped: BTreeMap<&str, (SentenceId, PartialLabelVector)> = BTreeMap::new();
    for a in annotations.iter().filter(|a| a.source == AnnotationSource::ActiveRound) {
        let entry = grouped
            .entry(a.dedup_key.as_str())
            .or_insert_with(|| (a.sentence_id(), PartialLabelVector::new()));
        entry.1.insert(a.task, a.label)?;
    }
    grouped
        .into_values()
        .map(|(id, labels)| {
            let s = text_of.get(&id).ok_or_else(|| {
                Error::Misaligned(format!("corpus lacks annotated ({}, {})", id.0, id.1))
            })?;
            Ok(Example::new(s.text.clone(), labels))
        })
        .collect()
}

/// Fine-tunes on the round's annotations and scores teacher, raw student
/// and fine-tuned student on the held-out gold labels.
pub fn run_round(inputs: RoundInputs, config: &RoundConfig) -> Result<(Checkpoint, RoundReport)> {
    let heldout: Vec<AnnotationRecord> = inputs
        .annotations
        .iter()
        .filter(|a| a.source == AnnotationSource::Heldout)
        .cloned()
        .collect();
    let training: Vec<&AnnotationRecord> = inputs
        .annotations
        .iter()
        .filter(|a| a.source == AnnotationSource::ActiveRound)
        .collect();
    if training.is_empty() {
        return Err(Error::Precondition("no active_round annotations".into()));
    }
    if heldout.is_empty() {
        return Err(Error::Precondition("no held-out annotations".into()));
    }
    let heldout_keys: BTreeSet<&str> = heldout.iter().map(|a| a.dedup_key.as_str()).collect();
    let overlap: BTreeSet<&str> = training
        .iter()
        .map(|a| a.dedup_key.as_str())
        .filter(|k| heldout_keys.contains(k))
        .collect();
    if let Some(first) = overlap.iter().next() {
        return Err(Error::HeldoutOverlap {
            count: overlap.len(),
            first: first.to_string(),
        });
    }

    let text_of: HashMap<SentenceId, &SentenceRecord> =
        inputs.corpus.iter().map(|s| (s.id(), s)).collect();
    let annotated = annotation_examples(inputs.annotations, &text_of)?;
    let n_sentences = annotated.len();
    let mut dataset = annotated;
    let mut n_teacher_examples = 0;
    if config.mix_teacher > 0.0 {
        let annotated_keys: BTreeSet<&str> = training.iter().map(|a| a.dedup_key.as_str()).collect();
        let teacher_labels: HashMap<SentenceId, &LabelRecord> =
            inputs.teacher.iter().map(|r| (r.id(), r)).collect();
        let pool: Vec<Example> = inputs
            .corpus
            .iter()
            .filter(|s| !heldout_keys.contains(s.dedup_key()) && !annotated_keys.contains(s.dedup_key()))
            .filter_map(|s| {
                teacher_labels
                    .get(&s.id())
                    .map(|r| Example::new(s.text.clone(), r.labels.to_partial()))
            })
            .collect();
        let before = dataset.len();
        dataset = mix_teacher(&dataset, &pool, config.mix_teacher, config.train.seed)?;
        n_teacher_examples = dataset.len() - before;
    }

    let outcome = fine_tune(inputs.checkpoint, &dataset, &config.train)?;

    let mut ids: Vec<SentenceId> = heldout.iter().map(AnnotationRecord::sentence_id).collect();
    ids.sort();
    ids.dedup();
    let predict = |ck: &Checkpoint| -> Result<Vec<LabelRecord>> {
        ids.iter()
            .map(|id| {
                let s = text_of.get(id).ok_or_else(|| {
                    Error::Misaligned(format!("corpus lacks held-out ({}, {})", id.0, id.1))
                })?;
                Ok(LabelRecord {
                    report_id: id.0.clone(),
                    sentence_index: id.1,
                    labels: predict_text(&ck.params, &s.text).0,
                })
            })
            .collect()
    };
    let teacher = gold_accuracy(&heldout, inputs.teacher)?;
    let raw = gold_accuracy(&heldout, &predict(inputs.checkpoint)?)?;
    let post = gold_accuracy(&heldout, &predict(&outcome.checkpoint)?)?;
    let report = RoundReport {
        schema_version: crate::eval::REPORT_SCHEMA_VERSION,
        n_annotations: training.len(),
        n_sentences,
        n_teacher_examples,
        comparison: GoldComparison::new(
            teacher,
            vec![("student_raw".into(), raw), ("student_post".into(), post)],
        ),
        log: outcome.log,
    };
    Ok((outcome.checkpoint, report))
}

/// Supplies labels for selected sentences.
pub trait Annotator {
    fn id(&self) -> &str;

    fn label(&mut self, item: &SelectedItem, task: TaskId) -> Result<MentionClass>;
}

/// Answers from known gold labels, standing in for a human.
pub struct GoldOracle {
    id: String,
    gold: HashMap<SentenceId, crate::types::LabelVector>,
}

impl GoldOracle {
    pub fn new(id: impl Into<String>, gold: &[LabelRecord]) -> Self {
        GoldOracle {
            id: id.into(),
            gold: gold.iter().map(|r| (r.id(), r.labels)).collect(),
        }
    }
}

impl Annotator for GoldOracle {
    fn id(&self) -> &str {
        &self.id
    }

    fn label(&mut self, item: &SelectedItem, task: TaskId) -> Result<MentionClass> {
        self.gold
            .get(&(item.report_id.clone(), item.sentence_index))
            .map(|v| v.get(task))
            .ok_or_else(|| {
                Error::Misaligned(format!(
                    "no gold label for ({}, {})",
                    item.report_id, item.sentence_index
                ))
            })
    }
}

/// Appends one `active_round` record per requested (sentence, task).
/// Returns how many were added.
pub fn annotate_selection(
    items: &[SelectedItem],
    annotator: &mut dyn Annotator,
    store: &mut AnnotationStore,
) -> Result<usize> {
    let mut added = 0;
    for item in items {
        for &task in &item.requested_by {
            let label = annotator.label(item, task)?;
            store.append(AnnotationRecord {
                dedup_key: item.dedup_key.clone(),
                report_id: item.report_id.clone(),
                sentence_index: item.sentence_index,
                task,
                label,
                annotator_id: annotator.id().to_string(),
                timestamp: now_ms(),
                source: AnnotationSource::ActiveRound,
            })?;
            added += 1;
        }
    }
    Ok(added)
}

pub struct LoopData<'a> {
    /// Sentences eligible for selection.
    pub pool: &'a [SentenceRecord],
    /// Everything referenced by annotations, held-out set included.
    pub corpus: &'a [SentenceRecord],
    pub teacher: &'a [LabelRecord],
}

/// `rounds` iterations of select → annotate → fine-tune. Each round
/// selects from `pool` (minus held-out and already annotated keys) with
/// the current checkpoint, and fine-tunes on every `active_round`
/// annotation gathered so far.
pub fn run_rounds(
    rounds: usize,
    data: LoopData,
    checkpoint: Checkpoint,
    store: &mut AnnotationStore,
    annotator: &mut dyn Annotator,
    config: &RoundConfig,
) -> Result<(Checkpoint, Vec<RoundReport>)> {
    let LoopData {
        pool,
        corpus,
        teacher,
    } = data;
    let mut current = checkpoint;
    let mut reports = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let exclude: BTreeSet<String> = store
            .records()
            .iter()
            .filter(|a| a.source != AnnotationSource::Adjudication)
            .map(|a| a.dedup_key.clone())
            .collect();
        let probs = predict_corpus(pool, &current.params, 256)?.probs;
        let selection = select_uncertain(pool, &probs, config.k_per_task, &exclude, config.measure)?;
        annotate_selection(&selection.items, annotator, store)?;
        let (next, report) = run_round(
            RoundInputs {
                corpus,
                teacher,
                checkpoint: &current,
                annotations: store.records(),
            },
            config,
        )?;
        current = next;
        reports.push(report);
    }
    Ok((current, reports))
}
