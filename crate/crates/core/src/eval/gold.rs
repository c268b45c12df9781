use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ratio, REPORT_SCHEMA_VERSION};
use crate::active::AnnotationRecord;
use crate::error::{Error, Result};
use crate::types::{LabelRecord, LabelVector, MentionClass, SentenceId, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskAccuracy {
    pub correct: u64,
    pub total: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldReport {
    pub schema_version: u32,
    pub n_pairs: u64,
    /// Only tasks with at least one gold label appear.
    pub per_task: BTreeMap<TaskId, TaskAccuracy>,
    /// Unweighted mean of per-task accuracies.
    pub macro_accuracy: f64,
    /// Per task, counts keyed by `gold -> predicted`.
    pub cells: BTreeMap<TaskId, BTreeMap<MentionClass, BTreeMap<MentionClass, u64>>>,
}

fn index(labels: &[LabelRecord]) -> HashMap<SentenceId, &LabelVector> {
    labels.iter().map(|r| (r.id(), &r.labels)).collect()
}

/// Accuracy of `prediction` on exactly the annotated (sentence, task) pairs.
pub fn gold_accuracy(gold: &[AnnotationRecord], prediction: &[LabelRecord]) -> Result<GoldReport> {
    let pred = index(prediction);
    let mut counts: BTreeMap<TaskId, (u64, u64)> = BTreeMap::new();
    let mut cells: BTreeMap<TaskId, BTreeMap<MentionClass, BTreeMap<MentionClass, u64>>> =
        BTreeMap::new();
    for g in gold {
        let labels = pred.get(&g.sentence_id()).ok_or_else(|| {
            Error::Misaligned(format!(
                "no prediction for ({}, {}) task {}",
                g.report_id, g.sentence_index, g.task
            ))
        })?;
        let p = labels.get(g.task);
        let c = counts.entry(g.task).or_default();
        c.0 += u64::from(p == g.label);
        c.1 += 1;
        *cells
            .entry(g.task)
            .or_default()
            .entry(g.label)
            .or_default()
            .entry(p)
            .or_default() += 1;
    }
    let per_task: BTreeMap<TaskId, TaskAccuracy> = counts
        .into_iter()
        .map(|(t, (correct, total))| {
            (
                t,
                TaskAccuracy {
                    correct,
                    total,
                    accuracy: ratio(correct, total),
                },
            )
        })
        .collect();
    let macro_accuracy = if per_task.is_empty() {
        0.0
    } else {
        per_task.values().map(|a| a.accuracy).sum::<f64>() / per_task.len() as f64
    };
    Ok(GoldReport {
        schema_version: REPORT_SCHEMA_VERSION,
        n_pairs: gold.len() as u64,
        per_task,
        macro_accuracy,
        cells,
    })
}

/// Teacher accuracy plus each system's accuracy and its difference from
/// the teacher, per task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldComparison {
    pub schema_version: u32,
    pub teacher: GoldReport,
    pub systems: Vec<(String, GoldReport)>,
}

impl GoldComparison {
    pub fn new(teacher: GoldReport, systems: Vec<(String, GoldReport)>) -> Self {
        GoldComparison {
            schema_version: REPORT_SCHEMA_VERSION,
            teacher,
            systems,
        }
    }

    /// System accuracy minus teacher accuracy, per task.
    pub fn differences(&self, system: usize) -> BTreeMap<TaskId, f64> {
        let (_, sys) = &self.systems[system];
        self.teacher
            .per_task
            .iter()
            .filter_map(|(t, a)| sys.per_task.get(t).map(|b| (*t, b.accuracy - a.accuracy)))
            .collect()
    }

    pub fn render(&self) -> String {
        let mut s = format!("{:<28}{:>10}", "Task", "teacher");
        for (name, _) in &self.systems {
            let _ = write!(s, "{:>22}", format!("{name} (diff)"));
        }
        s.push('\n');
        let diffs: Vec<_> = (0..self.systems.len()).map(|i| self.differences(i)).collect();
        for (task, acc) in &self.teacher.per_task {
            let _ = write!(s, "{:<28}{:>10.1}", task.display_name(), 100.0 * acc.accuracy);
            for (i, (_, sys)) in self.systems.iter().enumerate() {
                let cell = match (sys.per_task.get(task), diffs[i].get(task)) {
                    (Some(a), Some(d)) => format!("{:.1} ({:+.1})", 100.0 * a.accuracy, 100.0 * d),
                    _ => "-".into(),
                };
                let _ = write!(s, "{cell:>22}");
            }
            s.push('\n');
        }
        let _ = write!(s, "{:<28}{:>10.1}", "Average", 100.0 * self.teacher.macro_accuracy);
        for (_, sys) in &self.systems {
            let d = sys.macro_accuracy - self.teacher.macro_accuracy;
            let _ = write!(
                s,
                "{:>22}",
                format!("{:.1} ({:+.1})", 100.0 * sys.macro_accuracy, 100.0 * d)
            );
        }
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub schema_version: u32,
    pub shared_pairs: u64,
    pub agreement: f64,
    pub a_vs_labels: Option<f64>,
    pub b_vs_labels: Option<f64>,
}

fn first_labels(records: &[AnnotationRecord]) -> BTreeMap<(String, TaskId), &AnnotationRecord> {
    let mut out = BTreeMap::new();
    for r in records {
        out.entry((r.dedup_key.clone(), r.task)).or_insert(r);
    }
    out
}

/// Agreement between two annotators on the (sentence, task) pairs both
/// labelled, and optionally each annotator's agreement with a labels file
/// over that same shared set.
pub fn agreement(
    a: &[AnnotationRecord],
    b: &[AnnotationRecord],
    labels: Option<&[LabelRecord]>,
) -> Result<AgreementReport> {
    let (a, b) = (first_labels(a), first_labels(b));
    let shared: Vec<_> = a
        .iter()
        .filter_map(|(k, ra)| b.get(k).map(|rb| (*ra, *rb)))
        .collect();
    if shared.is_empty() {
        return Err(Error::Precondition(
            "annotators share no (sentence, task) pairs".into(),
        ));
    }
    let n = shared.len() as u64;
    let agree = shared.iter().filter(|(x, y)| x.label == y.label).count() as u64;
    let vs = |use_a: bool| -> Result<Option<f64>> {
        let Some(labels) = labels else {
            return Ok(None);
        };
        let idx = index(labels);
        let mut hit = 0;
        for pair in &shared {
            let r = if use_a { pair.0 } else { pair.1 };
            let v = idx.get(&r.sentence_id()).ok_or_else(|| {
                Error::Misaligned(format!("labels file lacks ({}, {})", r.report_id, r.sentence_index))
            })?;
            hit += u64::from(v.get(r.task) == r.label);
        }
        Ok(Some(ratio(hit, n)))
    };
    Ok(AgreementReport {
        schema_version: REPORT_SCHEMA_VERSION,
        shared_pairs: n,
        agreement: ratio(agree, n),
        a_vs_labels: vs(true)?,
        b_vs_labels: vs(false)?,
    })
}
