use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_aligned, REPORT_SCHEMA_VERSION};
use crate::active::{AdjudicationRecord, Verdict};
use crate::error::{Error, Result};
use crate::types::{LabelRecord, MentionClass, SentenceId, SentenceRecord, TaskId};

pub const DEFAULT_PER_TASK_CAP: usize = 46;

/// Which input file a blinded label came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSide {
    Reference,
    Prediction,
}

/// One blinded comparison. Carries no hint of which label is which.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationItem {
    pub blinding_id: String,
    pub report_id: String,
    pub sentence_index: u32,
    pub dedup_key: String,
    pub text: String,
    pub task: TaskId,
    pub label_a: MentionClass,
    pub label_b: MentionClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjudicationQueue {
    pub schema_version: u32,
    pub items: Vec<AdjudicationItem>,
    /// `blinding_id` → source of label A. Kept apart from the items.
    pub unblinding: BTreeMap<String, LabelSide>,
}

/// Per task, up to `per_task_cap` uniformly sampled sentences on which the
/// two files disagree, each with its labels in random A/B order.
pub fn discrepancy_sample(
    corpus: &[SentenceRecord],
    reference: &[LabelRecord],
    prediction: &[LabelRecord],
    per_task_cap: usize,
    seed: u64,
) -> Result<AdjudicationQueue> {
    check_aligned(reference, prediction)?;
    let sentences: HashMap<SentenceId, &SentenceRecord> =
        corpus.iter().map(|s| (s.id(), s)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::new();
    let mut unblinding = BTreeMap::new();
    for task in TaskId::ALL {
        let discrepant: Vec<usize> = (0..reference.len())
            .filter(|&i| reference[i].labels.get(task) != prediction[i].labels.get(task))
            .collect();
        let n = per_task_cap.min(discrepant.len());
        let mut chosen: Vec<usize> = sample(&mut rng, discrepant.len(), n)
            .into_iter()
            .map(|j| discrepant[j])
            .collect();
        chosen.sort_unstable();
        for i in chosen {
            let (r, p) = (&reference[i], &prediction[i]);
            let s = sentences.get(&r.id()).ok_or_else(|| {
                Error::Misaligned(format!("corpus lacks ({}, {})", r.report_id, r.sentence_index))
            })?;
            let (ref_label, pred_label) = (r.labels.get(task), p.labels.get(task));
            let a_is_reference = rng.gen_bool(0.5);
            let blinding_id = format!("{:016x}", rng.gen::<u64>());
            let (label_a, label_b, side) = if a_is_reference {
                (ref_label, pred_label, LabelSide::Reference)
            } else {
                (pred_label, ref_label, LabelSide::Prediction)
            };
            unblinding.insert(blinding_id.clone(), side);
            items.push(AdjudicationItem {
                blinding_id,
                report_id: r.report_id.clone(),
                sentence_index: r.sentence_index,
                dedup_key: s.dedup_key().to_string(),
                text: s.text.clone(),
                task,
                label_a,
                label_b,
            });
        }
    }
    Ok(AdjudicationQueue {
        schema_version: REPORT_SCHEMA_VERSION,
        items,
        unblinding,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationTally {
    pub prefer_reference: u64,
    pub prefer_prediction: u64,
    pub both_wrong: u64,
    pub unsure: u64,
}

impl AdjudicationTally {
    pub fn total(&self) -> u64 {
        self.prefer_reference + self.prefer_prediction + self.both_wrong + self.unsure
    }
}

/// Unblinds verdicts and counts them per task.
pub fn tally_adjudications(
    records: &[AdjudicationRecord],
    unblinding: &BTreeMap<String, LabelSide>,
) -> Result<BTreeMap<TaskId, AdjudicationTally>> {
    let mut out: BTreeMap<TaskId, AdjudicationTally> = BTreeMap::new();
    for r in records {
        let side = unblinding.get(&r.blinding_id).ok_or_else(|| {
            Error::Validation(format!("unknown blinding id {}", r.blinding_id))
        })?;
        let t = out.entry(r.task).or_default();
        match (r.verdict, side) {
            (Verdict::PreferA, LabelSide::Reference) | (Verdict::PreferB, LabelSide::Prediction) => {
                t.prefer_reference += 1
            }
            (Verdict::PreferA, LabelSide::Prediction) | (Verdict::PreferB, LabelSide::Reference) => {
                t.prefer_prediction += 1
            }
            (Verdict::BothWrong, _) => t.both_wrong += 1,
            (Verdict::Unsure, _) => t.unsure += 1,
        }
    }
    Ok(out)
}

/// Adjudication counts per task with the sample size, starred where fewer
/// than `cap` discrepancies existed.
pub fn render_tally(tally: &BTreeMap<TaskId, AdjudicationTally>, cap: usize) -> String {
    let mut s = format!(
        "{:<28}{:>6}{:>12}{:>12}{:>12}{:>8}\n",
        "Task", "N", "reference", "prediction", "both wrong", "unsure"
    );
    for (task, t) in tally {
        let n = t.total();
        let star = if (n as usize) < cap { "*" } else { "" };
        let _ = writeln!(
            s,
            "{:<28}{:>6}{:>12}{:>12}{:>12}{:>8}",
            task.display_name(),
            format!("{n}{star}"),
            t.prefer_reference,
            t.prefer_prediction,
            t.both_wrong,
            t.unsure
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::LabelVector;
    use MentionClass::*;

    fn setup(n: u32, differ: impl Fn(u32) -> bool) -> (Vec<SentenceRecord>, Vec<LabelRecord>, Vec<LabelRecord>) {
        let corpus: Vec<_> = (0..n)
            .map(|i| SentenceRecord::new("r", i, format!("sentence {i}")))
            .collect();
        let mk = |i: u32, c: MentionClass| LabelRecord {
            report_id: "r".into(),
            sentence_index: i,
            labels: LabelVector::from_findings(|t| if t == TaskId::LungLesion { c } else { NoMention }),
        };
        let reference = (0..n).map(|i| mk(i, Positive)).collect();
        let prediction = (0..n)
            .map(|i| mk(i, if differ(i) { Negative } else { Positive }))
            .collect();
        (corpus, reference, prediction)
    }

    #[test]
    fn no_discrepancies_no_items() {
        let (c, r, p) = setup(5, |_| false);
        let q = discrepancy_sample(&c, &r, &p, 46, 1).unwrap();
        assert!(q.items.is_empty());
    }

    #[test]
    fn small_pool_is_taken_whole() {
        let (c, r, p) = setup(30, |i| i % 3 == 0);
        let q = discrepancy_sample(&c, &r, &p, 46, 1).unwrap();
        // lung lesion differs on 10 sentences; no_finding flips with it
        let lesion: Vec<_> = q.items.iter().filter(|i| i.task == TaskId::LungLesion).collect();
        assert_eq!(lesion.len(), 10);
        let capped = discrepancy_sample(&c, &r, &p, 4, 1).unwrap();
        assert_eq!(capped.items.iter().filter(|i| i.task == TaskId::LungLesion).count(), 4);
    }

    #[test]
    fn unblinding_recovers_sources() {
        let (c, r, p) = setup(40, |i| i % 2 == 0);
        let q = discrepancy_sample(&c, &r, &p, 46, 9).unwrap();
        for item in &q.items {
            let i = item.sentence_index as usize;
            let (ref_l, pred_l) = (r[i].labels.get(item.task), p[i].labels.get(item.task));
            match q.unblinding[&item.blinding_id] {
                LabelSide::Reference => assert_eq!((item.label_a, item.label_b), (ref_l, pred_l)),
                LabelSide::Prediction => assert_eq!((item.label_a, item.label_b), (pred_l, ref_l)),
            }
        }
        let sides: Vec<_> = q.unblinding.values().collect();
        assert!(sides.contains(&&LabelSide::Reference) && sides.contains(&&LabelSide::Prediction));
    }

    #[test]
    fn tally_unblinds_verdicts() {
        let mut unblinding = BTreeMap::new();
        unblinding.insert("x".to_string(), LabelSide::Prediction);
        unblinding.insert("y".to_string(), LabelSide::Reference);
        let rec = |b: &str, v: Verdict| AdjudicationRecord {
            dedup_key: "k".into(),
            task: TaskId::Edema,
            verdict: v,
            annotator_id: "a".into(),
            blinding_id: b.into(),
        };
        let t = tally_adjudications(
            &[rec("x", Verdict::PreferA), rec("y", Verdict::PreferA), rec("y", Verdict::BothWrong)],
            &unblinding,
        )
        .unwrap();
        let e = t[&TaskId::Edema];
        assert_eq!((e.prefer_prediction, e.prefer_reference, e.both_wrong), (1, 1, 1));
        assert!(render_tally(&t, 46).contains("3*"));
        assert!(tally_adjudications(&[rec("z", Verdict::Unsure)], &unblinding).is_err());
    }
}
