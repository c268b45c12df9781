use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{check_aligned, ratio, KeyFilter, REPORT_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::types::{LabelRecord, MentionClass, TaskId};

/// Rows are the reference class, columns the prediction, both in ordinal
/// order (no_mention, negative, uncertain, positive).
pub type Confusion = [[u64; 4]; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityReport {
    pub schema_version: u32,
    pub n_sentences: u64,
    pub n_pairs: u64,
    /// Pair-weighted agreement.
    pub overall_match: f64,
    /// Unweighted mean over tasks of per-task agreement.
    pub task_macro_match: f64,
    pub per_task_failure: BTreeMap<TaskId, f64>,
    pub per_task_pairs: BTreeMap<TaskId, u64>,
    pub confusion: BTreeMap<TaskId, Confusion>,
}

impl ParityReport {
    pub fn matched_pairs(&self) -> u64 {
        self.confusion
            .values()
            .map(|m| (0..4).map(|i| m[i][i]).sum::<u64>())
            .sum()
    }

    /// Each non-empty row scaled to sum to 1.
    pub fn row_normalized(&self, task: TaskId) -> [[f64; 4]; 4] {
        let m = &self.confusion[&task];
        let mut out = [[0.0; 4]; 4];
        for (row, counts) in out.iter_mut().zip(m) {
            let total: u64 = counts.iter().sum();
            for (o, c) in row.iter_mut().zip(counts) {
                *o = ratio(*c, total);
            }
        }
        out
    }

    /// `ln(1 + count)`, for heat-map style display.
    pub fn log_counts(&self, task: TaskId) -> [[f64; 4]; 4] {
        let m = &self.confusion[&task];
        let mut out = [[0.0; 4]; 4];
        for (row, counts) in out.iter_mut().zip(m) {
            for (o, c) in row.iter_mut().zip(counts) {
                *o = (*c as f64).ln_1p();
            }
        }
        out
    }

    /// A plain-text confusion matrix for one task.
    pub fn render_confusion(&self, task: TaskId, normalized: bool) -> String {
        let classes = MentionClass::ALL;
        let mut s = format!("{} (rows: reference, columns: prediction)\n", task.display_name());
        let _ = write!(s, "{:>12}", "");
        for c in classes {
            let _ = write!(s, "{:>12}", c.as_str());
        }
        s.push('\n');
        let norm = self.row_normalized(task);
        for (i, c) in classes.iter().enumerate() {
            let _ = write!(s, "{:>12}", c.as_str());
            for j in 0..4 {
                if normalized {
                    let _ = write!(s, "{:>12.4}", norm[i][j]);
                } else {
                    let _ = write!(s, "{:>12}", self.confusion[&task][i][j]);
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Agreement between two aligned label files, optionally restricted to
/// sentences accepted by `restrict_to`.
pub fn parity(
    reference: &[LabelRecord],
    prediction: &[LabelRecord],
    restrict_to: Option<&KeyFilter>,
) -> Result<ParityReport> {
    check_aligned(reference, prediction)?;
    let mut confusion: BTreeMap<TaskId, Confusion> =
        TaskId::ALL.iter().map(|t| (*t, [[0; 4]; 4])).collect();
    let mut n_sentences = 0u64;
    for (r, p) in reference.iter().zip(prediction) {
        if restrict_to.is_some_and(|f| !f.contains(r)) {
            continue;
        }
        n_sentences += 1;
        for task in TaskId::ALL {
            let m = confusion.get_mut(&task).expect("all tasks present");
            m[r.labels.get(task).ordinal()][p.labels.get(task).ordinal()] += 1;
        }
    }
    if n_sentences == 0 {
        return Err(Error::Precondition("no sentences to compare".into()));
    }

    let mut per_task_failure = BTreeMap::new();
    let mut per_task_pairs = BTreeMap::new();
    let mut matched = 0u64;
    let mut macro_sum = 0.0;
    for (task, m) in &confusion {
        let total: u64 = m.iter().flatten().sum();
        let trace: u64 = (0..4).map(|i| m[i][i]).sum();
        matched += trace;
        per_task_failure.insert(*task, ratio(total - trace, total));
        per_task_pairs.insert(*task, total);
        macro_sum += ratio(trace, total);
    }
    let n_pairs = n_sentences * TaskId::ALL.len() as u64;
    Ok(ParityReport {
        schema_version: REPORT_SCHEMA_VERSION,
        n_sentences,
        n_pairs,
        overall_match: ratio(matched, n_pairs),
        task_macro_match: macro_sum / TaskId::ALL.len() as f64,
        per_task_failure,
        per_task_pairs,
        confusion,
    })
}

/// Per task, the failure rate of always predicting the most frequent
/// reference class (ties to the lower ordinal).
pub fn majority_baseline(reference: &[LabelRecord]) -> Result<BTreeMap<TaskId, f64>> {
    if reference.is_empty() {
        return Err(Error::Precondition("empty labels file".into()));
    }
    let n = reference.len() as u64;
    Ok(TaskId::ALL
        .iter()
        .map(|&task| {
            let mut counts = [0u64; 4];
            for r in reference {
                counts[r.labels.get(task).ordinal()] += 1;
            }
            let mut best = 0;
            for i in 1..4 {
                if counts[i] > counts[best] {
                    best = i;
                }
            }
            (task, ratio(n - counts[best], n))
        })
        .collect())
}

/// Failure-to-match per task in percent, with an optional majority-class
/// column, in canonical task order.
pub fn render_failure_table(report: &ParityReport, baseline: Option<&BTreeMap<TaskId, f64>>) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<28}{:>14}", "Task", "Failure (%)");
    if baseline.is_some() {
        let _ = write!(s, "{:>14}", "Majority (%)");
    }
    s.push('\n');
    for task in TaskId::ALL {
        let _ = write!(
            s,
            "{:<28}{:>14.2}",
            task.display_name(),
            100.0 * report.per_task_failure[&task]
        );
        if let Some(b) = baseline {
            let _ = write!(s, "{:>14.2}", 100.0 * b[&task]);
        }
        s.push('\n');
    }
    let _ = writeln!(
        s,
        "{:<28}{:>14.2}",
        "Overall match (%)",
        100.0 * report.overall_match
    );
    let _ = writeln!(
        s,
        "{:<28}{:>14.2}",
        "Task-macro match (%)",
        100.0 * report.task_macro_match
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::LabelVector;
    use MentionClass::*;

    fn rec(i: u32, labels: LabelVector) -> LabelRecord {
        LabelRecord {
            report_id: "r".into(),
            sentence_index: i,
            labels,
        }
    }

    #[test]
    fn identical_files_match_fully() {
        let a = vec![rec(0, LabelVector::empty())];
        let r = parity(&a, &a, None).unwrap();
        assert_eq!(r.overall_match, 1.0);
        assert!(r.per_task_failure.values().all(|f| *f == 0.0));
    }

    #[test]
    fn one_task_differs() {
        let a = vec![rec(0, LabelVector::empty())];
        let mut v = LabelVector::empty();
        v.set(TaskId::Edema, Negative).unwrap();
        let b = vec![rec(0, v)];
        let r = parity(&a, &b, None).unwrap();
        assert!((r.overall_match - 13.0 / 14.0).abs() < 1e-15);
        assert_eq!(r.per_task_failure[&TaskId::Edema], 1.0);
        assert_eq!(r.confusion[&TaskId::Edema][0][1], 1);
        assert_eq!(r.row_normalized(TaskId::Edema)[0], [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(r.row_normalized(TaskId::Edema)[1], [0.0; 4]);
    }

    #[test]
    fn baseline_ties_and_single_class() {
        let mk = |c: MentionClass| {
            rec(0, LabelVector::from_findings(|t| if t == TaskId::Edema { c } else { NoMention }))
        };
        let labels = vec![mk(Negative), mk(Negative), mk(Positive), mk(Positive)];
        let b = majority_baseline(&labels).unwrap();
        assert_eq!(b[&TaskId::Edema], 0.5);
        assert_eq!(b[&TaskId::Fracture], 0.0);
        assert!(majority_baseline(&[]).is_err());
    }

    #[test]
    fn table_lists_every_task() {
        let a = vec![rec(0, LabelVector::empty())];
        let r = parity(&a, &a, None).unwrap();
        let b = majority_baseline(&a).unwrap();
        let t = render_failure_table(&r, Some(&b));
        assert_eq!(t.lines().count(), 1 + 14 + 2);
        assert!(t.contains("Pleural Effusion"));
        assert!(r.render_confusion(TaskId::Edema, true).contains("no_mention"));
    }
}
