//! Shared fixture for the benchmarks.

use silverloop_core::corpus::{generate, GeneratorConfig};
use silverloop_core::rules::{classify_corpus, CompiledRuleSet, RuleSet};
use silverloop_core::surrogate::{train, Checkpoint, Example, Init, ModelConfig, TrainConfig};
use silverloop_core::{LabelRecord, SentenceRecord};

pub const SEED: u64 = 42;

pub struct Fixture {
    pub corpus: Vec<SentenceRecord>,
    pub rules: CompiledRuleSet,
    pub teacher: Vec<LabelRecord>,
    pub examples: Vec<Example>,
    pub student: Checkpoint,
}

impl Fixture {
    /// A synthetic corpus of about `6 * reports` sentences, teacher labels
    /// for it and a student trained one epoch on them.
    pub fn new(reports: usize) -> Fixture {
        let corpus = generate(&GeneratorConfig {
            n_reports: reports,
            seed: SEED,
            ..Default::default()
        })
        .expect("corpus")
        .sentences;
        let rules = RuleSet::builtin_default().compile();
        let (teacher, _) = classify_corpus(&corpus, &rules, 1).expect("teacher");
        let examples: Vec<Example> = corpus
            .iter()
            .zip(&teacher)
            .map(|(s, t)| Example::new(s.text.clone(), t.labels.to_partial()))
            .collect();
        let config = TrainConfig {
            epochs: 1,
            seed: SEED,
            ..Default::default()
        };
        let student = train(&examples, &config, Init::Fresh(ModelConfig::default()), None)
            .expect("student")
            .checkpoint;
        Fixture {
            corpus,
            rules,
            teacher,
            examples,
            student,
        }
    }
}
