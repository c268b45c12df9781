use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use silverloop_core::active::{run_round, AnnotationSource, RoundInputs, RoundReport};
use silverloop_core::eval::{parity, ParityReport};
use silverloop_core::surrogate::{predict_corpus, predict_text, Checkpoint};
use silverloop_core::{io, Error, LabelRecord, Result, SentenceId, SentenceRecord};

use crate::queue::Queues;
use crate::{files, AppState};

pub(crate) fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// The checkpoint being served, with what is derived from it.
pub struct Model {
    pub checkpoint: Checkpoint,
    /// Student labels for every sentence in the label queue.
    pub queue_predictions: Vec<LabelRecord>,
    /// Student against teacher over the whole corpus.
    pub parity: Option<ParityReport>,
}

impl Model {
    pub fn build(
        checkpoint: Checkpoint,
        queues: &Queues,
        corpus: &[SentenceRecord],
        teacher: &[LabelRecord],
    ) -> Model {
        let mut seen: HashSet<SentenceId> = HashSet::new();
        let queue_predictions = queues
            .label
            .iter()
            .filter(|i| seen.insert(i.sentence_id()))
            .map(|i| LabelRecord {
                report_id: i.report_id.clone(),
                sentence_index: i.sentence_index,
                labels: predict_text(&checkpoint.params, &i.text).0,
            })
            .collect();
        let parity = if corpus.is_empty() || teacher.len() != corpus.len() {
            None
        } else {
            predict_corpus(corpus, &checkpoint.params, 256)
                .and_then(|p| parity(teacher, &p.labels, None))
                .map_err(|e| tracing::warn!(error = %e, "parity unavailable"))
                .ok()
        };
        Model {
            checkpoint,
            queue_predictions,
            parity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundStatus {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundState {
    pub id: String,
    pub status: RoundStatus,
    pub started_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<RoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Default)]
pub struct Rounds {
    next: usize,
    pub running: Option<String>,
    pub latest: Option<String>,
    pub by_id: BTreeMap<String, RoundState>,
}

impl Rounds {
    /// Continues numbering after any round reports already on disk.
    pub fn scan(dir: &Path) -> Result<Rounds> {
        let mut done = 0;
        if dir.exists() {
            let entries = std::fs::read_dir(dir).map_err(|e| Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })?;
            for entry in entries.flatten() {
                let name = entry.file_name().to_string_lossy().into_owned();
                if name.starts_with("round-") && name.ends_with(".report.json") {
                    done += 1;
                }
            }
        }
        Ok(Rounds {
            next: done + 1,
            ..Default::default()
        })
    }
}

pub enum StartError {
    Running(String),
    NotReady(String),
}

/// Registers a round and runs it on the blocking pool. Annotation
/// endpoints keep working from their own snapshot meanwhile.
pub fn start(state: &AppState) -> std::result::Result<RoundState, StartError> {
    let inner = &state.0;
    let model = inner
        .model
        .read()
        .unwrap()
        .clone()
        .ok_or_else(|| StartError::NotReady("no checkpoint loaded".into()))?;
    if inner.corpus.is_empty() {
        return Err(StartError::NotReady("no corpus in the data directory".into()));
    }
    let snap = state.snapshot();
    let has = |s| snap.annotations.iter().any(|a| a.source == s);
    if !has(AnnotationSource::ActiveRound) {
        return Err(StartError::NotReady("no active_round annotations yet".into()));
    }
    if !has(AnnotationSource::Heldout) {
        return Err(StartError::NotReady("no held-out annotations yet".into()));
    }

    let round = {
        let mut rounds = inner.rounds.lock().unwrap();
        if let Some(id) = &rounds.running {
            return Err(StartError::Running(id.clone()));
        }
        let id = format!("round-{}", rounds.next);
        rounds.next += 1;
        let round = RoundState {
            id: id.clone(),
            status: RoundStatus::Running,
            started_ms: now_ms(),
            finished_ms: None,
            checkpoint: None,
            report: None,
            error: None,
        };
        rounds.running = Some(id.clone());
        rounds.latest = Some(id.clone());
        rounds.by_id.insert(id, round.clone());
        round
    };
    tracing::info!(id = %round.id, annotations = snap.annotations.len(), "round started");

    let state = state.clone();
    let id = round.id.clone();
    tokio::task::spawn_blocking(move || {
        let started = Instant::now();
        let outcome = execute(&state, &id, &model, &snap.annotations);
        if let Some(rest) = state.0.config.round_min_duration.checked_sub(started.elapsed()) {
            std::thread::sleep(rest);
        }
        let mut rounds = state.0.rounds.lock().unwrap();
        rounds.running = None;
        let entry = rounds.by_id.get_mut(&id).expect("registered round");
        entry.finished_ms = Some(now_ms());
        match outcome {
            Ok((path, report)) => {
                tracing::info!(%id, post = report.post_macro(), "round finished");
                entry.status = RoundStatus::Done;
                entry.checkpoint = Some(path);
                entry.report = Some(report);
            }
            Err(e) => {
                tracing::warn!(%id, error = %e, "round failed");
                entry.status = RoundStatus::Failed;
                entry.error = Some(e.to_string());
            }
        }
    });
    Ok(round)
}

fn execute(
    state: &AppState,
    id: &str,
    model: &Model,
    annotations: &[silverloop_core::active::AnnotationRecord],
) -> Result<(String, RoundReport)> {
    let inner = &state.0;
    let (checkpoint, report) = run_round(
        RoundInputs {
            corpus: &inner.corpus,
            teacher: &inner.teacher,
            checkpoint: &model.checkpoint,
            annotations,
        },
        &inner.config.round,
    )?;
    let dir = inner.config.path(files::ROUNDS);
    let ck_path = dir.join(format!("{id}.student.json"));
    checkpoint.save(&ck_path)?;
    io::write_json(dir.join(format!("{id}.report.json")), &report)?;
    let next = state.build_model(checkpoint);
    *inner.model.write().unwrap() = Some(Arc::new(next));
    Ok((ck_path.display().to_string(), report))
}
