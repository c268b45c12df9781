use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{check_aligned, ratio, REPORT_SCHEMA_VERSION};
use crate::error::Result;
use crate::types::{LabelRecord, MentionClass, TaskId};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl BinaryCounts {
    fn add(&mut self, truth: bool, predicted: bool) {
        match (truth, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => {}
        }
    }

    fn merge(&mut self, other: BinaryCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn score(self) -> F1Score {
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        F1Score {
            precision,
            recall,
            f1,
            counts: self,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: BinaryCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskF1 {
    /// Any mention (negative, uncertain, positive) vs no_mention.
    pub mention: F1Score,
    pub negation: F1Score,
    pub uncertainty: F1Score,
}

/// F1 over the 13 finding tasks; `no_finding` has no mention state and is
/// left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub schema_version: u32,
    pub per_task: BTreeMap<TaskId, TaskF1>,
    /// Counts pooled across tasks before dividing.
    pub micro: TaskF1,
}

impl F1Report {
    pub fn render(&self) -> String {
        let mut s = format!("{:<28}{:>10}{:>10}{:>12}\n", "Task", "Mention", "Negation", "Uncertainty");
        let rows = self
            .per_task
            .iter()
            .map(|(t, f)| (t.display_name(), f))
            .chain(std::iter::once(("Micro average", &self.micro)));
        for (name, f) in rows {
            let _ = writeln!(
                s,
                "{:<28}{:>10.3}{:>10.3}{:>12.3}",
                name, f.mention.f1, f.negation.f1, f.uncertainty.f1
            );
        }
        s
    }
}

pub fn f1(reference: &[LabelRecord], prediction: &[LabelRecord]) -> Result<F1Report> {
    check_aligned(reference, prediction)?;
    let mut per_task = BTreeMap::new();
    let mut pooled = [BinaryCounts::default(); 3];
    for task in TaskId::findings() {
        let mut c = [BinaryCounts::default(); 3];
        for (r, p) in reference.iter().zip(prediction) {
            let (t, q) = (r.labels.get(task), p.labels.get(task));
            c[0].add(t != MentionClass::NoMention, q != MentionClass::NoMention);
            c[1].add(t == MentionClass::Negative, q == MentionClass::Negative);
            c[2].add(t == MentionClass::Uncertain, q == MentionClass::Uncertain);
        }
        for (acc, x) in pooled.iter_mut().zip(c) {
            acc.merge(x);
        }
        per_task.insert(
            task,
            TaskF1 {
                mention: c[0].score(),
                negation: c[1].score(),
                uncertainty: c[2].score(),
            },
        );
    }
    Ok(F1Report {
        schema_version: REPORT_SCHEMA_VERSION,
        per_task,
        micro: TaskF1 {
            mention: pooled[0].score(),
            negation: pooled[1].score(),
            uncertainty: pooled[2].score(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::LabelVector;
    use MentionClass::*;

    fn rec(i: u32, edema: MentionClass) -> LabelRecord {
        LabelRecord {
            report_id: "r".into(),
            sentence_index: i,
            labels: LabelVector::from_findings(|t| if t == TaskId::Edema { edema } else { NoMention }),
        }
    }

    #[test]
    fn perfect_prediction_scores_one_where_defined() {
        let a: Vec<_> = [Negative, Uncertain, Positive]
            .iter()
            .enumerate()
            .map(|(i, c)| rec(i as u32, *c))
            .collect();
        let r = f1(&a, &a).unwrap();
        let e = r.per_task[&TaskId::Edema];
        assert_eq!((e.mention.f1, e.negation.f1, e.uncertainty.f1), (1.0, 1.0, 1.0));
        // no mentions anywhere: 0/0 is defined as 0
        assert_eq!(r.per_task[&TaskId::Fracture].mention.f1, 0.0);
        assert_eq!(r.micro.mention.f1, 1.0);
        assert!(!r.per_task.contains_key(&TaskId::NoFinding));
    }

    #[test]
    fn all_no_mention_prediction_has_zero_mention_f1() {
        let reference = vec![rec(0, Positive), rec(1, Negative)];
        let prediction = vec![rec(0, NoMention), rec(1, NoMention)];
        assert_eq!(f1(&reference, &prediction).unwrap().micro.mention.f1, 0.0);
    }
}
