//! HTTP backend for the annotation workflow.
//!
//! Serves label and adjudication queues built from the files in a data
//! directory, persists answers through a single writer thread, reports
//! queue depths and accuracy, and runs fine-tune rounds in the background.
//! Everything lives under `/api/v1`; an optional static bundle is served
//! at `/`.

mod api;
mod queue;
mod rounds;
mod writer;

use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use silverloop_core::active::{
    AdjudicationStore, AnnotationStore, Heldout, RoundConfig, Selection,
};
use silverloop_core::eval::AdjudicationQueue;
use silverloop_core::rules::{classify_corpus, load_rules, RuleSet};
use silverloop_core::surrogate::Checkpoint;
use silverloop_core::{io, LabelRecord, Result, SentenceId, SentenceRecord};
use tokio::sync::watch;

pub use api::router;
pub use queue::{Depth, Mode, QueueItem};
pub use rounds::{RoundState, RoundStatus};
pub use writer::Snapshot;

pub const DEFAULT_PORT: u16 = 8675;

/// File names inside the data directory.
pub mod files {
    pub const CORPUS: &str = "corpus.jsonl";
    pub const TEACHER: &str = "teacher_labels.jsonl";
    pub const HELDOUT: &str = "heldout.json";
    pub const SELECTION: &str = "selection.json";
    pub const ADJUDICATION_QUEUE: &str = "adjudication_queue.json";
    pub const ANNOTATIONS: &str = "annotations.jsonl";
    pub const ADJUDICATIONS: &str = "adjudications.jsonl";
    pub const CHECKPOINT: &str = "student.json";
    pub const ROUNDS: &str = "rounds";
}

#[derive(Debug, Clone)]
pub struct Config {
    pub data_dir: PathBuf,
    /// Defaults to `student.json` in the data directory, if present.
    pub checkpoint: Option<PathBuf>,
    /// Used to label the corpus when no teacher label file exists.
    pub rules: Option<PathBuf>,
    pub ui_dir: Option<PathBuf>,
    pub round: RoundConfig,
    /// Minimum wall time of a round. Lets tests observe a running round.
    pub round_min_duration: Duration,
}

impl Config {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Config {
            data_dir: data_dir.into(),
            checkpoint: None,
            rules: None,
            ui_dir: None,
            round: RoundConfig::default(),
            round_min_duration: Duration::ZERO,
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.data_dir.join(name)
    }
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

struct Inner {
    config: Config,
    queues: queue::Queues,
    writer: writer::Writer,
    snapshot: watch::Receiver<Arc<Snapshot>>,
    corpus: Arc<Vec<SentenceRecord>>,
    teacher: Arc<Vec<LabelRecord>>,
    /// Teacher labels for the sentences in the label queue only.
    queue_teacher: Vec<LabelRecord>,
    model: RwLock<Option<Arc<rounds::Model>>>,
    rounds: Mutex<rounds::Rounds>,
}

fn read_optional<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    if path.exists() {
        io::read_json(path).map(Some)
    } else {
        Ok(None)
    }
}

impl AppState {
    /// Reads the data directory and replays both stores. Missing queue
    /// files give empty queues.
    pub fn load(config: Config) -> Result<AppState> {
        let corpus: Vec<SentenceRecord> = match config.path(files::CORPUS) {
            p if p.exists() => io::read_jsonl(p)?,
            _ => Vec::new(),
        };
        let teacher: Vec<LabelRecord> = match config.path(files::TEACHER) {
            p if p.exists() => io::read_jsonl(p)?,
            _ if corpus.is_empty() => Vec::new(),
            _ => {
                let rules = match &config.rules {
                    Some(p) => load_rules(p)?,
                    None => RuleSet::builtin_default(),
                };
                let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
                classify_corpus(&corpus, &rules.compile(), threads)?.0
            }
        };
        let heldout: Option<Heldout> = read_optional(&config.path(files::HELDOUT))?;
        let selection: Option<Selection> = read_optional(&config.path(files::SELECTION))?;
        let adjudication: Option<AdjudicationQueue> =
            read_optional(&config.path(files::ADJUDICATION_QUEUE))?;
        let queues = queue::Queues::new(
            heldout.as_ref(),
            selection.as_ref(),
            adjudication.map(|q| q.items).unwrap_or_default(),
        );
        let wanted: HashSet<SentenceId> = queues.label.iter().map(|i| i.sentence_id()).collect();
        let queue_teacher = teacher
            .iter()
            .filter(|r| wanted.contains(&r.id()))
            .cloned()
            .collect();

        let annotations = AnnotationStore::open(config.path(files::ANNOTATIONS))?;
        let adjudications = AdjudicationStore::open(config.path(files::ADJUDICATIONS))?;
        let (writer, snapshot) = writer::Writer::spawn(annotations, adjudications);

        let checkpoint_path = config
            .checkpoint
            .clone()
            .or_else(|| Some(config.path(files::CHECKPOINT)).filter(|p| p.exists()));
        let rounds = rounds::Rounds::scan(&config.path(files::ROUNDS))?;
        let state = AppState(Arc::new(Inner {
            queues,
            writer,
            snapshot,
            corpus: Arc::new(corpus),
            teacher: Arc::new(teacher),
            queue_teacher,
            model: RwLock::new(None),
            rounds: Mutex::new(rounds),
            config,
        }));
        if let Some(path) = checkpoint_path {
            let checkpoint = Checkpoint::load(&path)?;
            let model = state.build_model(checkpoint);
            *state.0.model.write().unwrap() = Some(Arc::new(model));
        }
        tracing::info!(
            label_items = state.0.queues.label.len(),
            adjudication_items = state.0.queues.adjudicate.len(),
            sentences = state.0.corpus.len(),
            "loaded data directory"
        );
        Ok(state)
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.0.snapshot.borrow().clone()
    }

    fn build_model(&self, checkpoint: Checkpoint) -> rounds::Model {
        rounds::Model::build(checkpoint, &self.0.queues, &self.0.corpus, &self.0.teacher)
    }
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
