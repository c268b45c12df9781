use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::uncertainty::UncertaintyMeasure;
use crate::error::{Error, Result};
use crate::types::{ProbRecord, SentenceId, SentenceRecord, TaskId};

pub const DEFAULT_K_PER_TASK: usize = 100;

/// A sentence picked for annotation and the tasks that asked for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedItem {
    pub dedup_key: String,
    pub report_id: String,
    pub sentence_index: u32,
    pub text: String,
    pub requested_by: Vec<TaskId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub items: Vec<SelectedItem>,
    /// Ranked dedup keys chosen for each task.
    pub per_task: BTreeMap<TaskId, Vec<String>>,
}

impl Selection {
    /// Number of (sentence, task) annotation requests.
    pub fn n_requests(&self) -> usize {
        self.items.iter().map(|i| i.requested_by.len()).sum()
    }
}

/// Per task, the `k_per_task` most uncertain distinct sentences not in
/// `exclude`. Ties break on dedup key, then file order.
pub fn select_uncertain(
    corpus: &[SentenceRecord],
    probs: &[ProbRecord],
    k_per_task: usize,
    exclude: &BTreeSet<String>,
    measure: UncertaintyMeasure,
) -> Result<Selection> {
    let sentences: HashMap<SentenceId, &SentenceRecord> =
        corpus.iter().map(|s| (s.id(), s)).collect();
    let rows: Vec<(&SentenceRecord, &ProbRecord)> = probs
        .iter()
        .map(|p| {
            sentences
                .get(&p.id())
                .map(|s| (*s, p))
                .ok_or_else(|| {
                    Error::Misaligned(format!(
                        "corpus lacks ({}, {})",
                        p.report_id, p.sentence_index
                    ))
                })
        })
        .collect::<Result<_>>()?;

    let mut per_task = BTreeMap::new();
    let mut items: Vec<SelectedItem> = Vec::new();
    let mut position: HashMap<String, usize> = HashMap::new();
    for task in TaskId::ALL {
        if k_per_task == 0 {
            per_task.insert(task, Vec::new());
            continue;
        }
        let mut scored = Vec::with_capacity(rows.len());
        for (i, (s, p)) in rows.iter().enumerate() {
            if exclude.contains(s.dedup_key()) {
                continue;
            }
            let dist = p.probs.get(&task).ok_or(Error::MissingTask(task))?;
            scored.push((measure.score(dist)?, s.dedup_key(), i));
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)).then(a.2.cmp(&b.2)));

        let mut chosen = Vec::new();
        let mut seen = BTreeSet::new();
        for (_, key, i) in scored {
            if chosen.len() == k_per_task {
                break;
            }
            if !seen.insert(key) {
                continue;
            }
            chosen.push(key.to_string());
            match position.get(key) {
                Some(&at) => items[at].requested_by.push(task),
                None => {
                    let s = rows[i].0;
                    position.insert(key.to_string(), items.len());
                    items.push(SelectedItem {
                        dedup_key: key.to_string(),
                        report_id: s.report_id.clone(),
                        sentence_index: s.sentence_index,
                        text: s.text.clone(),
                        requested_by: vec![task],
                    });
                }
            }
        }
        per_task.insert(task, chosen);
    }
    Ok(Selection { items, per_task })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edema_probs(values: &[(u32, [f64; 4])]) -> Vec<ProbRecord> {
        values
            .iter()
            .map(|(i, p)| ProbRecord {
                report_id: "r".into(),
                sentence_index: *i,
                probs: TaskId::ALL
                    .iter()
                    .map(|&t| {
                        let v = if t == TaskId::Edema {
                            p.to_vec()
                        } else if t == TaskId::NoFinding {
                            vec![0.0, 1.0]
                        } else {
                            vec![1.0, 0.0, 0.0, 0.0]
                        };
                        (t, v)
                    })
                    .collect(),
            })
            .collect()
    }

    fn corpus(texts: &[&str]) -> Vec<SentenceRecord> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| SentenceRecord::new("r", i as u32, *t))
            .collect()
    }

    #[test]
    fn ranks_by_entropy() {
        let c = corpus(&["a", "b", "c"]);
        let p = edema_probs(&[
            (0, [0.4, 0.3, 0.2, 0.1]),
            (1, [0.97, 0.01, 0.01, 0.01]),
            (2, [0.6, 0.2, 0.1, 0.1]),
        ]);
        let s = select_uncertain(&c, &p, 2, &BTreeSet::new(), UncertaintyMeasure::Entropy).unwrap();
        assert_eq!(s.per_task[&TaskId::Edema], vec!["a", "c"]);
        assert!(s.items.iter().all(|i| !i.dedup_key.is_empty()));
    }

    #[test]
    fn zero_k_is_empty() {
        let c = corpus(&["a"]);
        let p = edema_probs(&[(0, [0.25; 4])]);
        let s = select_uncertain(&c, &p, 0, &BTreeSet::new(), UncertaintyMeasure::Entropy).unwrap();
        assert!(s.items.is_empty());
    }

    #[test]
    fn duplicates_and_exclusions_dropped() {
        let c = corpus(&["No edema.", "no edema", "Possible edema.", "Edema."]);
        let p = edema_probs(&[
            (0, [0.25; 4]),
            (1, [0.25; 4]),
            (2, [0.5, 0.5, 0.0, 0.0]),
            (3, [0.4, 0.2, 0.2, 0.2]),
        ]);
        let exclude: BTreeSet<String> = ["edema".to_string()].into();
        let s = select_uncertain(&c, &p, 3, &exclude, UncertaintyMeasure::Entropy).unwrap();
        assert_eq!(s.per_task[&TaskId::Edema], vec!["no edema", "possible edema"]);
        let item = &s.items[0];
        assert_eq!(item.sentence_index, 0);
        assert!(item.requested_by.contains(&TaskId::Edema));
    }

    #[test]
    fn items_record_all_requesting_tasks() {
        let c = corpus(&["x"]);
        let mut p = edema_probs(&[(0, [0.25; 4])]);
        p[0].probs.insert(TaskId::Fracture, vec![0.5, 0.5, 0.0, 0.0]);
        let s = select_uncertain(&c, &p, 1, &BTreeSet::new(), UncertaintyMeasure::Entropy).unwrap();
        assert_eq!(s.items.len(), 1);
        assert!(s.items[0].requested_by.contains(&TaskId::Edema));
        assert!(s.items[0].requested_by.contains(&TaskId::Fracture));
        assert_eq!(s.n_requests(), 14);
    }
}
