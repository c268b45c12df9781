use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use proptest::prelude::*;
use silverloop_core::active::{
    build_heldout, run_rounds, AnnotationRecord, AnnotationSource, AnnotationStore, GoldOracle,
    LoopData, RoundConfig,
};
use silverloop_core::corpus::{generate, split, GeneratorConfig, SplitFractions};
use silverloop_core::rules::{classify_corpus, RuleSet};
use silverloop_core::surrogate::{train, Example, FeatureHasher, Init, ModelConfig, TrainConfig};
use silverloop_core::{MentionClass, TaskId};

fn record(key: usize, task: TaskId, label: MentionClass, source: AnnotationSource) -> AnnotationRecord {
    AnnotationRecord {
        dedup_key: format!("k{key}"),
        report_id: "r".into(),
        sentence_index: key as u32,
        task,
        label,
        annotator_id: "a".into(),
        timestamp: key as u64,
        source,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn store_replay_matches_accepted_appends(
        ops in prop::collection::vec((0usize..8, 0usize..14, 0usize..4), 1..40),
        torn in prop::option::of("[a-z{\":,]{1,30}"),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let mut store = AnnotationStore::open(&path).unwrap();
        let mut accepted = Vec::new();
        for (key, task, class) in ops {
            let task = TaskId::ALL[task];
            let rec = record(key, task, MentionClass::ALL[class], AnnotationSource::ActiveRound);
            if store.append(rec.clone()).is_ok() {
                accepted.push(rec);
            }
        }
        drop(store);
        if let Some(tail) = torn {
            let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
            f.write_all(tail.as_bytes()).unwrap();
        }
        let replayed = AnnotationStore::open(&path).unwrap();
        prop_assert_eq!(replayed.records(), accepted.as_slice());
        let keys: BTreeSet<_> = accepted.iter().map(|r| r.key()).collect();
        prop_assert_eq!(keys.len(), accepted.len());
    }
}

#[test]
fn duplicate_line_in_log_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let line = serde_json::to_string(&record(1, TaskId::Edema, MentionClass::Positive, AnnotationSource::Heldout)).unwrap();
    std::fs::write(&path, format!("{line}\n{line}\n")).unwrap();
    assert!(AnnotationStore::open(&path).is_err());
}

#[test]
fn two_rounds_never_touch_heldout_or_reannotate() {
    let c = generate(&GeneratorConfig { n_reports: 300, seed: 5, ..Default::default() }).unwrap();
    let (teacher, _) = classify_corpus(&c.sentences, &RuleSet::fixture().compile(), 2).unwrap();
    let manifest = split(&c.sentences, SplitFractions::default(), 5).unwrap();
    let labels: HashMap<_, _> = teacher.iter().map(|l| (l.id(), l.labels)).collect();
    let train_set: Vec<Example> = manifest
        .train(&c.sentences)
        .map(|s| Example::new(s.text.clone(), labels[&s.id()].to_partial()))
        .collect();
    let model = ModelConfig {
        hasher: FeatureHasher::new(1 << 12, 1).unwrap(),
        embed_dim: 16,
        hidden_dim: 16,
    };
    let student = train(&train_set, &TrainConfig { epochs: 1, ..Default::default() }, Init::Fresh(model), None)
        .unwrap()
        .checkpoint;

    let heldout = build_heldout(&c.sentences, &teacher, 2, 5, &BTreeSet::new()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut store = AnnotationStore::open(dir.path().join("a.jsonl")).unwrap();
    for h in &heldout.tasks {
        let gold = c.gold.iter().find(|g| g.report_id == h.report_id && g.sentence_index == h.sentence_index).unwrap();
        store
            .append(AnnotationRecord {
                dedup_key: h.dedup_key.clone(),
                report_id: h.report_id.clone(),
                sentence_index: h.sentence_index,
                task: h.task,
                label: gold.labels.get(h.task),
                annotator_id: "gold".into(),
                timestamp: 0,
                source: AnnotationSource::Heldout,
            })
            .unwrap();
    }
    let n_heldout = store.len();
    let mut oracle = GoldOracle::new("gold", &c.gold);
    let config = RoundConfig { k_per_task: 5, ..Default::default() };
    let (_, reports) = run_rounds(
        2,
        LoopData { pool: &c.sentences, corpus: &c.sentences, teacher: &teacher },
        student,
        &mut store,
        &mut oracle,
        &config,
    )
    .unwrap();
    assert_eq!(reports.len(), 2);
    assert!(reports[1].n_sentences > reports[0].n_sentences);

    let active: Vec<_> = store.records()[n_heldout..].to_vec();
    assert!(active.iter().all(|a| a.source == AnnotationSource::ActiveRound));
    let active_keys: BTreeSet<_> = active.iter().map(|a| a.dedup_key.clone()).collect();
    assert!(active_keys.is_disjoint(&heldout.keys()));
    for a in &active {
        let gold = c.gold.iter().find(|g| g.report_id == a.report_id && g.sentence_index == a.sentence_index).unwrap();
        assert_eq!(a.label, gold.labels.get(a.task));
    }
    for r in &reports {
        assert_eq!(r.comparison.teacher.n_pairs as usize, n_heldout);
        assert_eq!(r.log.len(), 1);
    }
}
