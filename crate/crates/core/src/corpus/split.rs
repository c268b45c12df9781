use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::SentenceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

/// Report-level split. `unseen_test_keys` are the dedup keys of test
/// sentences that never occur in a training report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train_report_ids: BTreeSet<String>,
    pub val_report_ids: BTreeSet<String>,
    pub test_report_ids: BTreeSet<String>,
    pub unseen_test_keys: BTreeSet<String>,
}

impl SplitManifest {
    pub fn train<'a>(&'a self, corpus: &'a [SentenceRecord]) -> impl Iterator<Item = &'a SentenceRecord> {
        corpus
            .iter()
            .filter(|s| self.train_report_ids.contains(&s.report_id))
    }

    pub fn val<'a>(&'a self, corpus: &'a [SentenceRecord]) -> impl Iterator<Item = &'a SentenceRecord> {
        corpus
            .iter()
            .filter(|s| self.val_report_ids.contains(&s.report_id))
    }

    pub fn test<'a>(&'a self, corpus: &'a [SentenceRecord]) -> impl Iterator<Item = &'a SentenceRecord> {
        corpus
            .iter()
            .filter(|s| self.test_report_ids.contains(&s.report_id))
    }

    /// Test sentences whose text was never seen in training.
    pub fn unseen_test<'a>(
        &'a self,
        corpus: &'a [SentenceRecord],
    ) -> impl Iterator<Item = &'a SentenceRecord> {
        self.test(corpus)
            .filter(|s| self.unseen_test_keys.contains(s.dedup_key()))
    }
}

pub fn split(corpus: &[SentenceRecord], fractions: SplitFractions, seed: u64) -> Result<SplitManifest> {
    let SplitFractions { train, val, test } = fractions;
    if [train, val, test].iter().any(|f| !(0.0..=1.0).contains(f)) || (train + val + test - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "split fractions must lie in [0, 1] and sum to 1, got ({train}, {val}, {test})"
        )));
    }
    let mut reports: Vec<&str> = corpus.iter().map(|s| s.report_id.as_str()).collect();
    reports.sort_unstable();
    reports.dedup();
    let n = reports.len();
    let n_splits = [train, val, test].iter().filter(|f| **f > 0.0).count();
    if n < n_splits {
        return Err(Error::Precondition(format!(
            "{n} reports cannot fill {n_splits} splits"
        )));
    }
    let count = |f: f64| {
        if f > 0.0 {
            ((f * n as f64).round() as usize).max(1)
        } else {
            0
        }
    };
    let n_val = count(val);
    let n_test = count(test);
    if train > 0.0 && n_val + n_test >= n {
        return Err(Error::Precondition(format!(
            "{n} reports leave no training reports"
        )));
    }

    reports.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let to_set = |ids: &[&str]| ids.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    let val_ids = to_set(&reports[..n_val]);
    let test_ids = to_set(&reports[n_val..n_val + n_test]);
    let train_ids = to_set(&reports[n_val + n_test..]);

    let train_keys: HashSet<&str> = corpus
        .iter()
        .filter(|s| train_ids.contains(&s.report_id))
        .map(|s| s.dedup_key())
        .collect();
    let unseen_test_keys = corpus
        .iter()
        .filter(|s| test_ids.contains(&s.report_id) && !train_keys.contains(s.dedup_key()))
        .map(|s| s.dedup_key().to_string())
        .collect();

    Ok(SplitManifest {
        seed,
        train_report_ids: train_ids,
        val_report_ids: val_ids,
        test_report_ids: test_ids,
        unseen_test_keys,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(n_reports: usize) -> Vec<SentenceRecord> {
        (0..n_reports)
            .flat_map(|r| {
                (0..3).map(move |s| SentenceRecord::new(format!("r{r}"), s, format!("s {r} {s}")))
            })
            .collect()
    }

    #[test]
    fn ten_reports_split_8_1_1() {
        let m = split(&corpus(10), SplitFractions::default(), 1).unwrap();
        assert_eq!(
            (m.train_report_ids.len(), m.val_report_ids.len(), m.test_report_ids.len()),
            (8, 1, 1)
        );
    }

    #[test]
    fn shared_sentence_is_not_unseen() {
        let mut c = corpus(10);
        for s in c.iter_mut() {
            if s.sentence_index == 0 {
                *s = SentenceRecord::new(s.report_id.clone(), 0, "No pleural effusion.");
            }
        }
        let m = split(&c, SplitFractions::default(), 2).unwrap();
        assert!(!m.unseen_test_keys.contains("no pleural effusion"));
        assert_eq!(m.unseen_test_keys.len(), 2);
    }

    #[test]
    fn too_few_reports() {
        assert!(split(&corpus(2), SplitFractions::default(), 0).is_err());
    }

    #[test]
    fn fractions_must_sum_to_one() {
        let f = SplitFractions {
            train: 0.8,
            val: 0.1,
            test: 0.2,
        };
        assert!(matches!(split(&corpus(10), f, 0), Err(Error::Validation(_))));
    }

    proptest! {
        #[test]
        fn split_partitions_reports(n in 3usize..60, seed in any::<u64>(), dup in 0usize..5) {
            let mut c = corpus(n);
            for s in c.iter_mut().filter(|s| s.sentence_index as usize == 0 && s.report_id.len() % 2 == 0) {
                *s = SentenceRecord::new(s.report_id.clone(), 0, format!("shared {dup}"));
            }
            let m = split(&c, SplitFractions::default(), seed).unwrap();
            let all: BTreeSet<String> = c.iter().map(|s| s.report_id.clone()).collect();
            let mut union = m.train_report_ids.clone();
            union.extend(m.val_report_ids.iter().cloned());
            union.extend(m.test_report_ids.iter().cloned());
            prop_assert_eq!(&union, &all);
            prop_assert_eq!(
                m.train_report_ids.len() + m.val_report_ids.len() + m.test_report_ids.len(),
                all.len()
            );
            let train_keys: BTreeSet<String> = m.train(&c).map(|s| s.dedup_key().to_string()).collect();
            prop_assert!(m.unseen_test_keys.is_disjoint(&train_keys));
            prop_assert_eq!(split(&c, SplitFractions::default(), seed).unwrap(), m);
        }
    }
}
