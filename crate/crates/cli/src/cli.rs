use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use silverloop_core::active::{UncertaintyMeasure, DEFAULT_K_PER_TASK, DEFAULT_PER_CELL};
use silverloop_core::eval::DEFAULT_PER_TASK_CAP;

/// Silver-label distillation: rule teacher, neural student, active learning.
#[derive(Debug, Parser)]
#[command(name = "silverloop", version)]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Relative paths resolve against this directory.
    #[arg(long, global = true, env = "SILVERLOOP_DATA", default_value = ".")]
    pub data_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with exact gold labels.
    GenCorpus(GenCorpus),
    /// Convert a report file (jsonl or csv) into a sentence corpus.
    Ingest(Ingest),
    /// Split a corpus 80/10/10 by report.
    Split(SplitArgs),
    /// Label a corpus with the rule-based teacher.
    Label(Label),
    /// Train the student on teacher labels.
    Train(Train),
    /// Run the student over a corpus.
    Predict(Predict),
    /// Compare label files, annotations and timings.
    #[command(subcommand)]
    Eval(Eval),
    /// Build the tiered held-out set to be gold-labelled.
    Heldout(HeldoutArgs),
    /// Pick the most uncertain sentences per task.
    Select(Select),
    /// Fine-tune a checkpoint on active_round annotations.
    FineTune(FineTune),
    /// Fine-tune and score against held-out gold, optionally repeating
    /// select and annotate with an oracle.
    Round(Round),
    /// Time teacher against student on one corpus.
    Bench(Bench),
    /// Run the annotation service.
    Serve(Serve),
}

#[derive(Debug, Args)]
pub struct GenCorpus {
    #[arg(long, default_value_t = 1000)]
    pub reports: usize,
    #[arg(long, default_value_t = 4)]
    pub min_sentences: usize,
    #[arg(long, default_value_t = 10)]
    pub max_sentences: usize,
    /// Per-character typo probability outside finding phrases.
    #[arg(long)]
    pub typo_rate: Option<f64>,
    #[arg(long)]
    pub swap_rate: Option<f64>,
    /// Per-cue-word probability of a typo.
    #[arg(long)]
    pub cue_typo_rate: Option<f64>,
    /// Full generator config as JSON; the flags above override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub gold_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Ingest {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "jsonl")]
    pub format: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub train: f64,
    #[arg(long, default_value_t = 0.1)]
    pub val: f64,
    #[arg(long, default_value_t = 0.1)]
    pub test: f64,
    /// Manifest file.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write train/val/test/unseen_test corpora into this directory.
    #[arg(long)]
    pub subsets_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Label {
    /// Rule file; the built-in default lexicon when absent.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    /// Remove a mention phrase before labelling, as `task=phrase`.
    #[arg(long = "drop-phrase", value_name = "TASK=PHRASE")]
    pub drop_phrases: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrainOpts {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct Train {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Teacher labels; every corpus sentence needs one.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, requires = "val_labels")]
    pub val_corpus: Option<PathBuf>,
    #[arg(long, requires = "val_corpus")]
    pub val_labels: Option<PathBuf>,
    #[command(flatten)]
    pub opts: TrainOpts,
    #[arg(long)]
    pub buckets: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Continue from this checkpoint instead of a fresh model.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Predict {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub probs_out: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
}

#[derive(Debug, Subcommand)]
pub enum Eval {
    /// Match rates, failure-to-match per task, confusion matrices.
    Parity(ParityArgs),
    /// Mention, negation and uncertainty F1 per task and micro-averaged.
    F1(PairArgs),
    /// Accuracy of label files on gold annotations.
    Gold(GoldArgs),
    /// Agreement between two annotators.
    Agreement(AgreementArgs),
    /// Same as the top-level bench command.
    Bench(Bench),
    /// Sample blinded disagreements for adjudication.
    Discrepancies(DiscrepancyArgs),
    /// Unblind and count adjudication verdicts.
    Adjudication(AdjudicationArgs),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print a readable table instead of JSON.
    #[arg(long)]
    pub text: bool,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ParityArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Only count unseen test sentences of this split manifest.
    #[arg(long, requires = "corpus")]
    pub unseen: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Include the majority-class failure rates.
    #[arg(long)]
    pub baseline: bool,
    /// With --text, also print these tasks' confusion matrices.
    #[arg(long = "confusion", value_name = "TASK")]
    pub confusion: Vec<String>,
}

#[derive(Debug, Args)]
pub struct GoldArgs {
    /// Annotation log; only held-out records count unless --all-sources.
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub all_sources: bool,
    #[arg(long)]
    pub teacher: PathBuf,
    /// Other systems, as `name=labels.jsonl`.
    #[arg(long = "system", value_name = "NAME=PATH")]
    pub systems: Vec<String>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Also score each annotator against this labels file.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct DiscrepancyArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PER_TASK_CAP)]
    pub per_task_cap: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AdjudicationArgs {
    #[arg(long)]
    pub queue: PathBuf,
    #[arg(long)]
    pub verdicts: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PER_TASK_CAP)]
    pub per_task_cap: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct HeldoutArgs {
    /// Sentences to draw from.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Teacher labels for those sentences.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PER_CELL)]
    pub per_cell: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Gold labels; when given, held-out annotations are written from them.
    #[arg(long, requires = "annotations")]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub annotations: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Select {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub probs: PathBuf,
    #[arg(long = "k", default_value_t = DEFAULT_K_PER_TASK)]
    pub k_per_task: usize,
    /// Held-out file whose keys are never selected.
    #[arg(long)]
    pub heldout: Option<PathBuf>,
    /// Annotation log whose keys are never selected again.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long, default_value = "entropy")]
    pub measure: UncertaintyMeasure,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FineTune {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Every sentence the annotations refer to.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[command(flatten)]
    pub opts: TrainOpts,
    /// Teacher examples added per annotated sentence.
    #[arg(long, default_value_t = 0.0, requires = "teacher")]
    pub mix_teacher: f64,
    #[arg(long)]
    pub teacher: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Round {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub teacher: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Annotation log; must hold held-out annotations.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Select, annotate from --gold and fine-tune this many times.
    #[arg(long, requires = "gold")]
    pub rounds: Option<usize>,
    /// Gold labels standing in for the annotator.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Sentences eligible for selection; defaults to --corpus.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long = "k", default_value_t = DEFAULT_K_PER_TASK)]
    pub k_per_task: usize,
    #[arg(long, default_value = "entropy")]
    pub measure: UncertaintyMeasure,
    #[command(flatten)]
    pub opts: TrainOpts,
    #[arg(long, default_value_t = 0.0)]
    pub mix_teacher: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Bench {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    /// Use only the first N sentences.
    #[arg(long)]
    pub limit: Option<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct Serve {
    #[arg(long, default_value_t = silverloop_service::DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Static annotation UI bundle served at /.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    #[command(flatten)]
    pub opts: TrainOpts,
}
