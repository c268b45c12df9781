//! Agreement and quality metrics. Everything is integer counting; floats
//! appear only in the final divisions.

mod adjudication;
mod bench;
mod f1;
mod gold;
mod parity;

use std::collections::{BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::types::{LabelRecord, SentenceId, SentenceRecord};

pub use adjudication::{
    discrepancy_sample, tally_adjudications, AdjudicationItem, AdjudicationQueue, AdjudicationTally,
    render_tally, LabelSide, DEFAULT_PER_TASK_CAP,
};
pub use bench::{bench, BenchReport};
pub use f1::{f1, BinaryCounts, F1Report, F1Score, TaskF1};
pub use gold::{agreement, gold_accuracy, AgreementReport, GoldComparison, GoldReport, TaskAccuracy};
pub use parity::{majority_baseline, parity, render_failure_table, ParityReport, Confusion};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Checks that two label files list the same sentences in the same order.
pub fn check_aligned(reference: &[LabelRecord], prediction: &[LabelRecord]) -> Result<()> {
    for (i, (r, p)) in reference.iter().zip(prediction).enumerate() {
        if r.report_id != p.report_id || r.sentence_index != p.sentence_index {
            return Err(Error::Misaligned(format!(
                "line {}: reference ({}, {}) vs prediction ({}, {})",
                i + 1,
                r.report_id,
                r.sentence_index,
                p.report_id,
                p.sentence_index
            )));
        }
    }
    if reference.len() != prediction.len() {
        let (longer, which) = if reference.len() > prediction.len() {
            (reference, "reference")
        } else {
            (prediction, "prediction")
        };
        let extra = &longer[reference.len().min(prediction.len())];
        return Err(Error::Misaligned(format!(
            "{which} has extra sentence ({}, {}) at line {}",
            extra.report_id,
            extra.sentence_index,
            reference.len().min(prediction.len()) + 1
        )));
    }
    Ok(())
}

/// Limits evaluation to sentences whose dedup key is in a given set.
#[derive(Debug, Clone, Default)]
pub struct KeyFilter {
    allowed: HashSet<SentenceId>,
}

impl KeyFilter {
    pub fn new(corpus: &[SentenceRecord], keys: &BTreeSet<String>) -> Self {
        KeyFilter {
            allowed: corpus
                .iter()
                .filter(|s| keys.contains(s.dedup_key()))
                .map(SentenceRecord::id)
                .collect(),
        }
    }

    pub fn contains(&self, record: &LabelRecord) -> bool {
        self.allowed
            .contains(&(record.report_id.clone(), record.sentence_index))
    }

    pub fn len(&self) -> usize {
        self.allowed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.allowed.is_empty()
    }
}

pub(crate) fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}
