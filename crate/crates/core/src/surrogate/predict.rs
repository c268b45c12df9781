use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use super::model::{argmax_class, head_range, ModelParams};
use crate::error::{Error, Result};
use crate::rules::CorpusTiming;
use crate::types::{LabelRecord, LabelVector, MentionClass, ProbRecord, SentenceRecord, TaskId, N_TASKS};

#[derive(Debug, Clone)]
pub struct Predictions {
    pub labels: Vec<LabelRecord>,
    pub probs: Vec<ProbRecord>,
    pub timing: CorpusTiming,
}

/// Argmax labels and full distributions for one sentence.
pub fn predict_text(params: &ModelParams, text: &str) -> (LabelVector, BTreeMap<TaskId, Vec<f64>>) {
    let act = params.activations(&params.config.hasher.features(text));
    let mut labels = [MentionClass::NoMention; N_TASKS];
    let mut probs = BTreeMap::new();
    for task in TaskId::ALL {
        let p = &act.probs[head_range(task)];
        labels[task.index()] = argmax_class(task, p);
        probs.insert(task, p.to_vec());
    }
    let labels = LabelVector::from_array(labels).expect("head widths match task classes");
    (labels, probs)
}

/// Runs the student over a corpus in data-parallel batches. Output order
/// matches input order and does not depend on `batch_size`.
pub fn predict_corpus(
    corpus: &[SentenceRecord],
    params: &ModelParams,
    batch_size: usize,
) -> Result<Predictions> {
    if batch_size == 0 {
        return Err(Error::Precondition("batch_size must be positive".into()));
    }
    let start = Instant::now();
    let rows: Vec<(LabelRecord, ProbRecord)> = corpus
        .par_chunks(batch_size)
        .flat_map_iter(|chunk| {
            chunk.iter().map(|rec| {
                let (labels, probs) = predict_text(params, &rec.text);
                (
                    LabelRecord {
                        report_id: rec.report_id.clone(),
                        sentence_index: rec.sentence_index,
                        labels,
                    },
                    ProbRecord {
                        report_id: rec.report_id.clone(),
                        sentence_index: rec.sentence_index,
                        probs,
                    },
                )
            })
        })
        .collect();
    let timing = CorpusTiming::measure(corpus.len(), rayon::current_num_threads(), start);
    let (labels, probs) = rows.into_iter().unzip();
    Ok(Predictions {
        labels,
        probs,
        timing,
    })
}
