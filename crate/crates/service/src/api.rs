use std::collections::{BTreeMap, HashMap};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use silverloop_core::active::{AdjudicationRecord, AnnotationRecord, AnnotationSource, Verdict};
use silverloop_core::eval::{gold_accuracy, GoldComparison, ParityReport};
use silverloop_core::{Error, MentionClass, TaskId};
use tower_http::services::ServeDir;

use crate::queue::{depths, Depths, Mode, QueueItem};
use crate::rounds::{self, now_ms, RoundState, RoundStatus, StartError};
use crate::writer::Record;
use crate::AppState;

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(r.status(), r.body_text())
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Duplicate(_) => StatusCode::CONFLICT,
            Error::InvalidLabel { .. } | Error::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %e, "request failed");
        }
        ApiError::new(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/queue/next", get(next_item))
        .route("/annotations", post(post_annotation))
        .route("/adjudications", post(post_adjudication))
        .route("/metrics", get(metrics))
        .route("/rounds", post(start_round))
        .route("/rounds/{id}", get(get_round));
    let app = Router::new().nest("/api/v1", api);
    let app = match &state.0.config.ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    };
    app.with_state(state)
}

fn annotator_of(raw: Option<&String>) -> ApiResult<&str> {
    match raw.map(|s| s.trim()) {
        Some(a) if !a.is_empty() => Ok(a),
        _ => Err(ApiError::new(StatusCode::BAD_REQUEST, "annotator is required")),
    }
}

async fn next_item(
    State(state): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let bad = |m: String| ApiError::new(StatusCode::BAD_REQUEST, m);
    let task = q
        .get("task")
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<TaskId>().map_err(|e| bad(e.to_string())))
        .transpose()?;
    let mode = q.get("mode").map_or(Ok(Mode::Label), |m| m.parse().map_err(bad))?;
    let annotator = annotator_of(q.get("annotator"))?;
    let snap = state.snapshot();
    let queues = &state.0.queues;
    let wanted = |t: TaskId| task.is_none_or(|want| want == t);
    let item: Option<QueueItem> = match mode {
        Mode::Label => queues
            .label
            .iter()
            .find(|i| wanted(i.task) && !snap.has_label(&i.answer_key(annotator)))
            .map(QueueItem::from),
        Mode::Adjudicate => queues
            .adjudicate
            .iter()
            .find(|i| wanted(i.task) && !snap.has_verdict(&i.blinding_id, annotator))
            .map(QueueItem::from),
    };
    Ok(match item {
        Some(item) => Json(item).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

#[derive(Deserialize)]
struct AnnotationBody {
    item_id: String,
    label: String,
    annotator: String,
}

#[derive(Serialize)]
struct Ack {
    item_id: String,
    status: &'static str,
}

fn unprocessable(e: impl ToString) -> ApiError {
    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
}

fn require_annotator(raw: &str) -> ApiResult<&str> {
    let a = raw.trim();
    if a.is_empty() {
        Err(unprocessable("annotator must not be empty"))
    } else {
        Ok(a)
    }
}

async fn post_annotation(
    State(state): State<AppState>,
    body: Result<Json<AnnotationBody>, JsonRejection>,
) -> ApiResult<Json<Ack>> {
    let Json(body) = body?;
    let item = state
        .0
        .queues
        .label_item(&body.item_id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown item {:?}", body.item_id)))?;
    let label: MentionClass = body.label.parse().map_err(unprocessable)?;
    item.task.check(label)?;
    let annotator = require_annotator(&body.annotator)?;
    let record = AnnotationRecord {
        dedup_key: item.dedup_key.clone(),
        report_id: item.report_id.clone(),
        sentence_index: item.sentence_index,
        task: item.task,
        label,
        annotator_id: annotator.to_string(),
        timestamp: now_ms(),
        source: item.source,
    };
    state.0.writer.write(Record::Annotation(record)).await?;
    Ok(Json(Ack {
        item_id: body.item_id,
        status: "stored",
    }))
}

#[derive(Deserialize)]
struct AdjudicationBody {
    item_id: String,
    verdict: String,
    annotator: String,
}

async fn post_adjudication(
    State(state): State<AppState>,
    body: Result<Json<AdjudicationBody>, JsonRejection>,
) -> ApiResult<Json<Ack>> {
    let Json(body) = body?;
    let item = state
        .0
        .queues
        .adjudication_item(&body.item_id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown item {:?}", body.item_id)))?;
    let verdict: Verdict = body.verdict.parse().map_err(unprocessable)?;
    let annotator = require_annotator(&body.annotator)?;
    let record = AdjudicationRecord {
        dedup_key: item.dedup_key.clone(),
        task: item.task,
        verdict,
        annotator_id: annotator.to_string(),
        blinding_id: item.blinding_id.clone(),
    };
    state.0.writer.write(Record::Adjudication(record)).await?;
    Ok(Json(Ack {
        item_id: body.item_id,
        status: "stored",
    }))
}

#[derive(Serialize)]
struct AnnotationCounts {
    total: usize,
    by_source: BTreeMap<&'static str, usize>,
    last_hour: usize,
}

#[derive(Serialize)]
struct AdjudicationCounts {
    total: usize,
    by_verdict: BTreeMap<&'static str, usize>,
}

#[derive(Serialize)]
struct RoundSummary {
    running: Option<String>,
    completed: usize,
    latest: Option<String>,
}

#[derive(Serialize)]
struct Metrics {
    queues: Depths,
    annotations: AnnotationCounts,
    adjudications: AdjudicationCounts,
    rounds: RoundSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    parity: Option<ParityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gold_accuracy: Option<GoldComparison>,
}

const HOUR_MS: u64 = 3_600_000;

async fn metrics(
    State(state): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<Metrics>> {
    let snap = state.snapshot();
    let annotator = q.get("annotator").map(|a| a.trim()).filter(|a| !a.is_empty());
    let queues = depths(&state.0.queues, &snap, annotator);

    let mut by_source = BTreeMap::new();
    for a in &snap.annotations {
        *by_source.entry(a.source.as_str()).or_default() += 1;
    }
    let since = now_ms().saturating_sub(HOUR_MS);
    let annotations = AnnotationCounts {
        total: snap.annotations.len(),
        by_source,
        last_hour: snap.annotations.iter().filter(|a| a.timestamp >= since).count(),
    };
    let mut by_verdict = BTreeMap::new();
    for a in &snap.adjudications {
        *by_verdict.entry(a.verdict.as_str()).or_default() += 1;
    }
    let adjudications = AdjudicationCounts {
        total: snap.adjudications.len(),
        by_verdict,
    };

    let rounds = {
        let r = state.0.rounds.lock().unwrap();
        RoundSummary {
            running: r.running.clone(),
            completed: r.by_id.values().filter(|s| s.status == RoundStatus::Done).count(),
            latest: r.latest.clone(),
        }
    };

    let model = state.0.model.read().unwrap().clone();
    let gold: Vec<AnnotationRecord> = snap
        .annotations
        .iter()
        .filter(|a| a.source == AnnotationSource::Heldout)
        .cloned()
        .collect();
    let gold_accuracy = if gold.is_empty() {
        None
    } else {
        let compare = || -> silverloop_core::Result<GoldComparison> {
            let teacher = gold_accuracy(&gold, &state.0.queue_teacher)?;
            let systems = match &model {
                Some(m) => vec![("student".to_string(), gold_accuracy(&gold, &m.queue_predictions)?)],
                None => Vec::new(),
            };
            Ok(GoldComparison::new(teacher, systems))
        };
        compare()
            .map_err(|e| tracing::warn!(error = %e, "gold accuracy unavailable"))
            .ok()
    };

    Ok(Json(Metrics {
        queues,
        annotations,
        adjudications,
        rounds,
        parity: model.and_then(|m| m.parity.clone()),
        gold_accuracy,
    }))
}

async fn start_round(State(state): State<AppState>) -> ApiResult<Response> {
    match rounds::start(&state) {
        Ok(round) => Ok((StatusCode::ACCEPTED, Json(round)).into_response()),
        Err(StartError::Running(id)) => Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("round {id} is still running"),
        )),
        Err(StartError::NotReady(why)) => Err(unprocessable(why)),
    }
}

async fn get_round(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<RoundState>> {
    let rounds = state.0.rounds.lock().unwrap();
    let round = rounds
        .by_id
        .get(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown round {id:?}")))?;
    Ok(Json(round.clone()))
}
