use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{LabelRecord, MentionClass, SentenceRecord, TaskId};

pub const DEFAULT_PER_CELL: usize = 10;

/// One sentence to be gold-labelled for one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeldoutTask {
    pub dedup_key: String,
    pub report_id: String,
    pub sentence_index: u32,
    pub text: String,
    pub task: TaskId,
    pub teacher_label: MentionClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub task: TaskId,
    pub label: MentionClass,
    pub wanted: usize,
    pub available: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heldout {
    pub tasks: Vec<HeldoutTask>,
    pub shortfalls: Vec<Shortfall>,
}

impl Heldout {
    /// Dedup keys that must never be used for training.
    pub fn keys(&self) -> BTreeSet<String> {
        self.tasks.iter().map(|t| t.dedup_key.clone()).collect()
    }

    pub fn per_task_counts(&self) -> BTreeMap<TaskId, usize> {
        let mut out = BTreeMap::new();
        for t in &self.tasks {
            *out.entry(t.task).or_default() += 1;
        }
        out
    }
}

/// Tiered gold set: for every (task, teacher label) cell, `per_cell`
/// distinct sentences drawn uniformly from those the teacher put in that
/// cell. A sentence is used at most once overall, so cells are filled from
/// the smallest pool up (ties in canonical order) and rare cells are not
/// starved by common ones. Keys in `exclude` are never drawn. Output is in
/// canonical (task, label) order.
pub fn build_heldout(
    corpus: &[SentenceRecord],
    teacher: &[LabelRecord],
    per_cell: usize,
    seed: u64,
    exclude: &BTreeSet<String>,
) -> Result<Heldout> {
    let labels: HashMap<_, _> = teacher.iter().map(|r| (r.id(), &r.labels)).collect();
    // first occurrence of each key represents it
    let mut reps: BTreeMap<&str, &SentenceRecord> = BTreeMap::new();
    for s in corpus {
        if !labels.contains_key(&s.id()) {
            return Err(Error::Misaligned(format!(
                "no teacher label for ({}, {})",
                s.report_id, s.sentence_index
            )));
        }
        if !exclude.contains(s.dedup_key()) {
            reps.entry(s.dedup_key()).or_insert(s);
        }
    }

    let in_cell = |s: &SentenceRecord, task: TaskId, label: MentionClass| {
        labels[&s.id()].get(task) == label
    };
    let mut cells: Vec<(usize, TaskId, MentionClass)> = TaskId::ALL
        .iter()
        .flat_map(|&t| t.classes().iter().map(move |&c| (t, c)))
        .map(|(t, c)| (reps.values().filter(|s| in_cell(s, t, c)).count(), t, c))
        .collect();
    cells.sort_by_key(|&(n, t, c)| (n, t, c.ordinal()));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used: BTreeSet<&str> = BTreeSet::new();
    let mut tasks = Vec::new();
    let mut shortfalls = Vec::new();
    for (_, task, label) in cells {
        {
            let pool: Vec<(&str, &SentenceRecord)> = reps
                .iter()
                .filter(|(k, s)| !used.contains(*k) && in_cell(s, task, label))
                .map(|(k, s)| (*k, *s))
                .collect();
            let n = per_cell.min(pool.len());
            if n < per_cell {
                shortfalls.push(Shortfall {
                    task,
                    label,
                    wanted: per_cell,
                    available: pool.len(),
                });
            }
            let mut picks: Vec<usize> = sample(&mut rng, pool.len(), n).into_vec();
            picks.sort_unstable();
            for i in picks {
                let (key, s) = pool[i];
                used.insert(key);
                tasks.push(HeldoutTask {
                    dedup_key: key.to_string(),
                    report_id: s.report_id.clone(),
                    sentence_index: s.sentence_index,
                    text: s.text.clone(),
                    task,
                    teacher_label: label,
                });
            }
        }
    }
    tasks.sort_by_key(|t| (t.task, t.teacher_label.ordinal()));
    shortfalls.sort_by_key(|s| (s.task, s.label.ordinal()));
    Ok(Heldout { tasks, shortfalls })
}
