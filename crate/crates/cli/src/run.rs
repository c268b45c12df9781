use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use silverloop_core::active::{
    annotation_examples, build_heldout, run_round, run_rounds, select_uncertain, AnnotationRecord,
    AnnotationSource, AnnotationStore, GoldOracle, Heldout, LoopData, RoundConfig, RoundInputs,
};
use silverloop_core::corpus::{generate, ingest, split, GeneratorConfig, SplitFractions};
use silverloop_core::eval::{
    agreement, bench, discrepancy_sample, f1, gold_accuracy, majority_baseline, parity,
    render_failure_table, render_tally, tally_adjudications, AdjudicationQueue, GoldComparison,
    KeyFilter,
};
use silverloop_core::io::{read_json, read_jsonl, write_json, write_jsonl};
use silverloop_core::rules::{classify_corpus, load_rules, RuleSet};
use silverloop_core::surrogate::{
    fine_tune, mix_teacher, predict_corpus, train_with, Checkpoint, Example, FeatureHasher, Init,
    ModelConfig, TrainConfig,
};
use silverloop_core::{LabelRecord, SentenceId, SentenceRecord, TaskId};

use crate::cli::*;

pub struct Ctx {
    pub data_dir: PathBuf,
    pub seed: u64,
}

impl Ctx {
    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.data_dir.join(p)
        }
    }

    fn corpus(&self, p: &Path) -> Result<Vec<SentenceRecord>> {
        Ok(read_jsonl(self.path(p))?)
    }

    fn labels(&self, p: &Path) -> Result<Vec<LabelRecord>> {
        Ok(read_jsonl(self.path(p))?)
    }

    fn rules(&self, p: Option<&Path>) -> Result<RuleSet> {
        Ok(match p {
            Some(p) => load_rules(self.path(p))?,
            None => RuleSet::builtin_default(),
        })
    }
}

/// One JSON line on stdout.
fn summary(value: Value) {
    println!("{value}");
}

fn emit<T: Serialize>(ctx: &Ctx, output: &Output, report: &T, text: impl FnOnce() -> String) -> Result<()> {
    if let Some(out) = &output.out {
        write_json(ctx.path(out), report)?;
    }
    if output.text {
        print!("{}", text());
    } else if output.out.is_none() {
        println!("{}", serde_json::to_string_pretty(report)?);
    }
    Ok(())
}

/// Labels for each corpus sentence, in corpus order.
fn aligned<'a>(corpus: &[SentenceRecord], labels: &'a [LabelRecord]) -> Result<Vec<&'a LabelRecord>> {
    let index: HashMap<SentenceId, &LabelRecord> = labels.iter().map(|l| (l.id(), l)).collect();
    corpus
        .iter()
        .map(|s| {
            index
                .get(&s.id())
                .copied()
                .with_context(|| format!("no label for ({}, {})", s.report_id, s.sentence_index))
        })
        .collect()
}

fn examples(corpus: &[SentenceRecord], labels: &[LabelRecord]) -> Result<Vec<Example>> {
    Ok(corpus
        .iter()
        .zip(aligned(corpus, labels)?)
        .map(|(s, l)| Example::new(s.text.clone(), l.labels.to_partial()))
        .collect())
}

fn train_config(ctx: &Ctx, base: TrainConfig, opts: &TrainOpts) -> TrainConfig {
    TrainConfig {
        epochs: opts.epochs.unwrap_or(base.epochs),
        batch_size: opts.batch_size.unwrap_or(base.batch_size),
        learning_rate: opts.learning_rate.unwrap_or(base.learning_rate),
        seed: ctx.seed,
        ..base
    }
}

fn parse_pair(raw: &str, what: &str) -> Result<(String, String)> {
    raw.split_once('=')
        .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .with_context(|| format!("{what} must look like NAME=VALUE, got {raw:?}"))
}

pub fn run(ctx: &Ctx, command: Command) -> Result<()> {
    match command {
        Command::GenCorpus(a) => gen_corpus(ctx, a),
        Command::Ingest(a) => {
            let format = a.format.parse()?;
            let corpus = ingest(ctx.path(&a.input), format)?;
            write_jsonl(ctx.path(&a.out), &corpus)?;
            summary(json!({ "command": "ingest", "sentences": corpus.len(), "out": a.out }));
            Ok(())
        }
        Command::Split(a) => split_cmd(ctx, a),
        Command::Label(a) => label(ctx, a),
        Command::Train(a) => train_cmd(ctx, a),
        Command::Predict(a) => predict(ctx, a),
        Command::Eval(e) => eval(ctx, e),
        Command::Heldout(a) => heldout(ctx, a),
        Command::Select(a) => select(ctx, a),
        Command::FineTune(a) => fine_tune_cmd(ctx, a),
        Command::Round(a) => round(ctx, a),
        Command::Bench(a) => bench_cmd(ctx, a),
        Command::Serve(a) => serve(ctx, a),
    }
}

fn gen_corpus(ctx: &Ctx, a: GenCorpus) -> Result<()> {
    let mut config: GeneratorConfig = match &a.config {
        Some(p) => read_json(ctx.path(p))?,
        None => GeneratorConfig {
            n_reports: a.reports,
            sentences_per_report: (a.min_sentences, a.max_sentences),
            ..Default::default()
        },
    };
    config.seed = ctx.seed;
    if let Some(r) = a.typo_rate {
        config.noise.typo_rate = r;
    }
    if let Some(r) = a.swap_rate {
        config.noise.synonym_swap_rate = r;
    }
    if let Some(r) = a.cue_typo_rate {
        config.noise.cue_typo_rate = r;
    }
    let c = generate(&config)?;
    write_jsonl(ctx.path(&a.out), &c.sentences)?;
    write_jsonl(ctx.path(&a.gold_out), &c.gold)?;
    summary(json!({
        "command": "gen-corpus",
        "reports": config.n_reports,
        "sentences": c.sentences.len(),
        "out": a.out,
        "gold_out": a.gold_out,
    }));
    Ok(())
}

fn split_cmd(ctx: &Ctx, a: SplitArgs) -> Result<()> {
    let corpus = ctx.corpus(&a.corpus)?;
    let fractions = SplitFractions {
        train: a.train,
        val: a.val,
        test: a.test,
    };
    let manifest = split(&corpus, fractions, ctx.seed)?;
    write_json(ctx.path(&a.out), &manifest)?;
    let counts = [
        manifest.train(&corpus).count(),
        manifest.val(&corpus).count(),
        manifest.test(&corpus).count(),
        manifest.unseen_test(&corpus).count(),
    ];
    if let Some(dir) = &a.subsets_dir {
        let dir = ctx.path(dir);
        write_jsonl(dir.join("train.jsonl"), manifest.train(&corpus))?;
        write_jsonl(dir.join("val.jsonl"), manifest.val(&corpus))?;
        write_jsonl(dir.join("test.jsonl"), manifest.test(&corpus))?;
        write_jsonl(dir.join("unseen_test.jsonl"), manifest.unseen_test(&corpus))?;
    }
    summary(json!({
        "command": "split",
        "train": counts[0],
        "val": counts[1],
        "test": counts[2],
        "unseen_test": counts[3],
        "out": a.out,
    }));
    Ok(())
}

fn label(ctx: &Ctx, a: Label) -> Result<()> {
    let mut rules = ctx.rules(a.rules.as_deref())?;
    for raw in &a.drop_phrases {
        let (task, phrase) = parse_pair(raw, "--drop-phrase")?;
        let task: TaskId = task.parse()?;
        if !rules.remove_phrase(task, &phrase) {
            bail!("rule set has no phrase {phrase:?} for task {task}");
        }
    }
    let corpus = ctx.corpus(&a.corpus)?;
    let (labels, timing) = classify_corpus(&corpus, &rules.compile(), a.parallelism)?;
    write_jsonl(ctx.path(&a.out), &labels)?;
    summary(json!({ "command": "label", "out": a.out, "timing": timing }));
    Ok(())
}

fn train_cmd(ctx: &Ctx, a: Train) -> Result<()> {
    let corpus = ctx.corpus(&a.corpus)?;
    let data = examples(&corpus, &ctx.labels(&a.labels)?)?;
    let val = match (&a.val_corpus, &a.val_labels) {
        (Some(c), Some(l)) => Some(examples(&ctx.corpus(c)?, &ctx.labels(l)?)?),
        _ => None,
    };
    let config = train_config(ctx, TrainConfig::default(), &a.opts);
    let init_ck;
    let init = match &a.init {
        Some(p) => {
            if a.buckets.is_some() || a.embed_dim.is_some() || a.hidden_dim.is_some() {
                bail!("model shape flags cannot be combined with --init");
            }
            init_ck = Checkpoint::load(ctx.path(p))?;
            Init::From(&init_ck)
        }
        None => {
            let d = ModelConfig::default();
            Init::Fresh(ModelConfig {
                hasher: FeatureHasher::new(a.buckets.unwrap_or(d.hasher.n_buckets), d.hasher.seed)?,
                embed_dim: a.embed_dim.unwrap_or(d.embed_dim),
                hidden_dim: a.hidden_dim.unwrap_or(d.hidden_dim),
            })
        }
    };
    let outcome = train_with(&data, &config, init, val.as_deref(), |e| {
        eprintln!("{}", json!({ "epoch": e }));
    })?;
    outcome.checkpoint.save(ctx.path(&a.out))?;
    summary(json!({
        "command": "train",
        "examples": data.len(),
        "out": a.out,
        "log": outcome.log,
    }));
    Ok(())
}

fn predict(ctx: &Ctx, a: Predict) -> Result<()> {
    let ck = Checkpoint::load(ctx.path(&a.checkpoint))?;
    let corpus = ctx.corpus(&a.corpus)?;
    let p = predict_corpus(&corpus, &ck.params, a.batch_size)?;
    write_jsonl(ctx.path(&a.out), &p.labels)?;
    if let Some(out) = &a.probs_out {
        write_jsonl(ctx.path(out), &p.probs)?;
    }
    summary(json!({ "command": "predict", "out": a.out, "timing": p.timing }));
    Ok(())
}

fn eval(ctx: &Ctx, e: Eval) -> Result<()> {
    match e {
        Eval::Parity(a) => {
            let reference = ctx.labels(&a.pair.reference)?;
            let prediction = ctx.labels(&a.pair.pred)?;
            let filter = match (&a.unseen, &a.corpus) {
                (Some(m), Some(c)) => {
                    let manifest: silverloop_core::corpus::SplitManifest = read_json(ctx.path(m))?;
                    Some(KeyFilter::new(&ctx.corpus(c)?, &manifest.unseen_test_keys))
                }
                _ => None,
            };
            let report = parity(&reference, &prediction, filter.as_ref())?;
            let confusion: Vec<TaskId> =
                a.confusion.iter().map(|t| t.parse()).collect::<Result<_, _>>()?;
            let baseline = if a.baseline {
                Some(majority_baseline(&reference)?)
            } else {
                None
            };
            let value = json!({ "parity": report, "majority_baseline": baseline });
            emit(ctx, &a.pair.output, &value, || {
                let mut s = render_failure_table(&report, baseline.as_ref());
                for task in confusion {
                    s.push_str(&report.render_confusion(task, false));
                    s.push_str(&report.render_confusion(task, true));
                }
                s
            })
        }
        Eval::F1(a) => {
            let report = f1(&ctx.labels(&a.reference)?, &ctx.labels(&a.pred)?)?;
            emit(ctx, &a.output, &report, || report.render())
        }
        Eval::Gold(a) => {
            let mut gold: Vec<AnnotationRecord> = read_jsonl(ctx.path(&a.annotations))?;
            if !a.all_sources {
                gold.retain(|g| g.source == AnnotationSource::Heldout);
            }
            if gold.is_empty() {
                bail!("no gold annotations to score against");
            }
            let teacher = gold_accuracy(&gold, &ctx.labels(&a.teacher)?)?;
            let mut systems = Vec::new();
            for raw in &a.systems {
                let (name, path) = parse_pair(raw, "--system")?;
                systems.push((name, gold_accuracy(&gold, &ctx.labels(Path::new(&path))?)?));
            }
            let report = GoldComparison::new(teacher, systems);
            emit(ctx, &a.output, &report, || report.render())
        }
        Eval::Agreement(a) => {
            let x: Vec<AnnotationRecord> = read_jsonl(ctx.path(&a.a))?;
            let y: Vec<AnnotationRecord> = read_jsonl(ctx.path(&a.b))?;
            let labels = a.labels.as_deref().map(|p| ctx.labels(p)).transpose()?;
            let report = agreement(&x, &y, labels.as_deref())?;
            emit(ctx, &a.output, &report, || {
                format!(
                    "agreement {:.1}% on {} shared pairs\n",
                    100.0 * report.agreement,
                    report.shared_pairs
                )
            })
        }
        Eval::Bench(a) => bench_cmd(ctx, a),
        Eval::Discrepancies(a) => {
            let corpus = ctx.corpus(&a.corpus)?;
            let queue = discrepancy_sample(
                &corpus,
                &ctx.labels(&a.reference)?,
                &ctx.labels(&a.pred)?,
                a.per_task_cap,
                ctx.seed,
            )?;
            write_json(ctx.path(&a.out), &queue)?;
            summary(json!({ "command": "eval discrepancies", "items": queue.items.len(), "out": a.out }));
            Ok(())
        }
        Eval::Adjudication(a) => {
            let queue: AdjudicationQueue = read_json(ctx.path(&a.queue))?;
            let verdicts = read_jsonl(ctx.path(&a.verdicts))?;
            let tally = tally_adjudications(&verdicts, &queue.unblinding)?;
            emit(ctx, &a.output, &tally, || render_tally(&tally, a.per_task_cap))
        }
    }
}

fn heldout(ctx: &Ctx, a: HeldoutArgs) -> Result<()> {
    let corpus = ctx.corpus(&a.corpus)?;
    let labels: Vec<LabelRecord> = aligned(&corpus, &ctx.labels(&a.labels)?)?.into_iter().cloned().collect();
    let h = build_heldout(&corpus, &labels, a.per_cell, ctx.seed, &BTreeSet::new())?;
    write_json(ctx.path(&a.out), &h)?;
    for s in &h.shortfalls {
        eprintln!("{}", json!({ "warning": "held-out shortfall", "cell": s }));
    }
    let mut written = 0;
    if let (Some(gold), Some(out)) = (&a.gold, &a.annotations) {
        let gold = ctx.labels(gold)?;
        let mut store = AnnotationStore::open(ctx.path(out))?;
        let index: HashMap<SentenceId, &LabelRecord> = gold.iter().map(|g| (g.id(), g)).collect();
        for t in &h.tasks {
            let g = index
                .get(&(t.report_id.clone(), t.sentence_index))
                .with_context(|| format!("no gold label for ({}, {})", t.report_id, t.sentence_index))?;
            let record = AnnotationRecord {
                dedup_key: t.dedup_key.clone(),
                report_id: t.report_id.clone(),
                sentence_index: t.sentence_index,
                task: t.task,
                label: g.labels.get(t.task),
                annotator_id: "gold".into(),
                timestamp: 0,
                source: AnnotationSource::Heldout,
            };
            if !store.contains(&record.key()) {
                store.append(record)?;
                written += 1;
            }
        }
    }
    summary(json!({
        "command": "heldout",
        "items": h.tasks.len(),
        "per_task": h.per_task_counts(),
        "shortfalls": h.shortfalls.len(),
        "gold_annotations_written": written,
        "out": a.out,
    }));
    Ok(())
}

fn select(ctx: &Ctx, a: Select) -> Result<()> {
    let corpus = ctx.corpus(&a.corpus)?;
    let probs = read_jsonl(ctx.path(&a.probs))?;
    let mut exclude = BTreeSet::new();
    if let Some(p) = &a.heldout {
        let h: Heldout = read_json(ctx.path(p))?;
        exclude.extend(h.keys());
    }
    if let Some(p) = &a.annotations {
        let recs: Vec<AnnotationRecord> = read_jsonl(ctx.path(p))?;
        exclude.extend(recs.into_iter().map(|r| r.dedup_key));
    }
    let selection = select_uncertain(&corpus, &probs, a.k_per_task, &exclude, a.measure)?;
    write_json(ctx.path(&a.out), &selection)?;
    summary(json!({
        "command": "select",
        "sentences": selection.items.len(),
        "requests": selection.n_requests(),
        "excluded_keys": exclude.len(),
        "out": a.out,
    }));
    Ok(())
}

fn fine_tune_cmd(ctx: &Ctx, a: FineTune) -> Result<()> {
    let ck = Checkpoint::load(ctx.path(&a.checkpoint))?;
    let corpus = ctx.corpus(&a.corpus)?;
    let annotations: Vec<AnnotationRecord> = read_jsonl(ctx.path(&a.annotations))?;
    let text_of: HashMap<SentenceId, &SentenceRecord> = corpus.iter().map(|s| (s.id(), s)).collect();
    let mut data = annotation_examples(&annotations, &text_of)?;
    let annotated = data.len();
    if let Some(t) = &a.teacher {
        let keys: BTreeSet<&str> = annotations.iter().map(|r| r.dedup_key.as_str()).collect();
        let pool_corpus: Vec<SentenceRecord> =
            corpus.iter().filter(|s| !keys.contains(s.dedup_key())).cloned().collect();
        let pool = examples(&pool_corpus, &ctx.labels(t)?)?;
        data = mix_teacher(&data, &pool, a.mix_teacher, ctx.seed)?;
    }
    let config = train_config(ctx, TrainConfig::fine_tune(), &a.opts);
    let outcome = fine_tune(&ck, &data, &config)?;
    outcome.checkpoint.save(ctx.path(&a.out))?;
    summary(json!({
        "command": "fine-tune",
        "annotated_sentences": annotated,
        "teacher_examples": data.len() - annotated,
        "out": a.out,
        "log": outcome.log,
    }));
    Ok(())
}

fn round(ctx: &Ctx, a: Round) -> Result<()> {
    let corpus = ctx.corpus(&a.corpus)?;
    let teacher = ctx.labels(&a.teacher)?;
    let ck = Checkpoint::load(ctx.path(&a.checkpoint))?;
    let mut store = AnnotationStore::open(ctx.path(&a.annotations))?;
    let config = RoundConfig {
        train: train_config(ctx, TrainConfig::fine_tune(), &a.opts),
        mix_teacher: a.mix_teacher,
        k_per_task: a.k_per_task,
        measure: a.measure,
    };
    let (next, reports) = match (a.rounds, &a.gold) {
        (Some(n), Some(gold)) => {
            let pool = match &a.pool {
                Some(p) => ctx.corpus(p)?,
                None => corpus.clone(),
            };
            let mut oracle = GoldOracle::new("gold", &ctx.labels(gold)?);
            run_rounds(
                n,
                LoopData {
                    pool: &pool,
                    corpus: &corpus,
                    teacher: &teacher,
                },
                ck,
                &mut store,
                &mut oracle,
                &config,
            )?
        }
        _ => {
            let inputs = RoundInputs {
                corpus: &corpus,
                teacher: &teacher,
                checkpoint: &ck,
                annotations: store.records(),
            };
            let (next, report) = run_round(inputs, &config)?;
            (next, vec![report])
        }
    };
    next.save(ctx.path(&a.out))?;
    write_json(ctx.path(&a.report_out), &reports)?;
    if let Some(last) = reports.last() {
        eprint!("{}", last.comparison.render());
    }
    let rows: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "annotations": r.n_annotations,
                "sentences": r.n_sentences,
                "teacher": r.teacher_macro(),
                "student_raw": r.raw_macro(),
                "student_post": r.post_macro(),
            })
        })
        .collect();
    summary(json!({ "command": "round", "rounds": rows, "out": a.out, "report_out": a.report_out }));
    Ok(())
}

fn bench_cmd(ctx: &Ctx, a: Bench) -> Result<()> {
    let mut corpus = ctx.corpus(&a.corpus)?;
    if let Some(n) = a.limit {
        corpus.truncate(n);
    }
    let rules = ctx.rules(a.rules.as_deref())?.compile();
    let ck = Checkpoint::load(ctx.path(&a.checkpoint))?;
    let report = bench(&corpus, &rules, &ck.params, a.parallelism, a.batch_size)?;
    emit(ctx, &a.output, &report, || report.render())
}

fn serve(ctx: &Ctx, a: Serve) -> Result<()> {
    let mut config = silverloop_service::Config::new(&ctx.data_dir);
    config.checkpoint = a.checkpoint.as_deref().map(|p| ctx.path(p));
    config.rules = a.rules.as_deref().map(|p| ctx.path(p));
    config.ui_dir = a.ui_dir.as_deref().map(|p| ctx.path(p));
    config.round.train = train_config(ctx, TrainConfig::fine_tune(), &a.opts);
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let state = silverloop_service::AppState::load(config)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(silverloop_service::serve(state, (a.host, a.port).into()))?;
    Ok(())
}
