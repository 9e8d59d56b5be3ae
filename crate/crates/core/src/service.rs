//! JSON-over-HTTP API for inspecting a run, labeling activities and
//! re-cutting dendrograms. All routes live under `/api/v1`.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use chrono::DateTime;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{Mutex, RwLock};

use crate::cluster::{ClusterError, DendrogramNode};
use crate::export::{self, ExportError, ExportFormat};
use crate::ingest::{Email, EmailId};
use crate::labeling::{ClassificationResult, LabelError, LabelSource};
use crate::pipeline::{InstanceStats, PipelineError, SweepEntry};
use crate::run::{Phase, Run, RunError};

pub struct AppState {
    run: RwLock<Run>,
    path: Option<PathBuf>,
    writer: Mutex<()>,
    generation: AtomicU64,
    recuts_in_flight: AtomicUsize,
}

impl AppState {
    /// `path`, when given, receives the run file after every mutation.
    pub fn new(run: Run, path: Option<PathBuf>) -> Arc<Self> {
        Arc::new(Self {
            run: RwLock::new(run),
            path,
            writer: Mutex::new(()),
            generation: AtomicU64::new(0),
            recuts_in_flight: AtomicUsize::new(0),
        })
    }

    /// Marks a recut as in flight until the guard drops; label writes are
    /// refused meanwhile.
    pub fn recut_guard(self: &Arc<Self>) -> RecutGuard {
        self.recuts_in_flight.fetch_add(1, Ordering::SeqCst);
        RecutGuard { state: Arc::clone(self) }
    }

    pub fn recut_in_flight(&self) -> bool {
        self.recuts_in_flight.load(Ordering::SeqCst) > 0
    }

    pub async fn snapshot(&self) -> Run {
        self.run.read().await.clone()
    }

    fn persist(&self, run: &Run) -> Result<(), ApiError> {
        if let Some(path) = &self.path {
            run.save(path)?;
        }
        Ok(())
    }
}

pub struct RecutGuard {
    state: Arc<AppState>,
}

impl Drop for RecutGuard {
    fn drop(&mut self) {
        self.state.recuts_in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self { status, kind, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": { "kind": self.kind, "message": self.message } }))).into_response()
    }
}

impl From<RunError> for ApiError {
    fn from(e: RunError) -> Self {
        let message = e.to_string();
        let (status, kind) = match &e {
            RunError::UnknownTopic(_) | RunError::UnknownActivity(_) => (StatusCode::NOT_FOUND, "not_found"),
            RunError::Pipeline(PipelineError::UnknownInstance(_) | PipelineError::UnknownTopic(_)) => {
                (StatusCode::NOT_FOUND, "not_found")
            }
            RunError::Label(LabelError::EmptyLabel) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_label"),
            RunError::Label(LabelError::UnknownActivity(_)) => (StatusCode::NOT_FOUND, "not_found"),
            RunError::MissingPhase(_) => (StatusCode::CONFLICT, "missing_phase"),
            RunError::Unlabeled(_) => (StatusCode::CONFLICT, "unlabeled"),
            RunError::Config(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_config"),
            RunError::Pipeline(
                PipelineError::KOutOfRange { .. }
                | PipelineError::SeedOutsideTopic { .. }
                | PipelineError::Cluster(ClusterError::InvalidK { .. } | ClusterError::InvalidHeight(_)),
            ) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_request"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError::new(status, kind, message)
    }
}

impl From<ExportError> for ApiError {
    fn from(e: ExportError) -> Self {
        match e {
            ExportError::Run(r) => r.into(),
            ExportError::Unlabeled(_) => ApiError::new(StatusCode::CONFLICT, "unlabeled", e.to_string()),
            ExportError::AmbiguousTopic(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "choose_topic", e.to_string()),
            ExportError::EmptySelection(_) | ExportError::EmptyLog => {
                ApiError::new(StatusCode::CONFLICT, "empty", e.to_string())
            }
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
        }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub clusters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub silhouette: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub version: u32,
    pub corpus_digest: String,
    pub source: String,
    pub emails: usize,
    pub topics: Option<PhaseSummary>,
    pub instances: Option<PhaseSummary>,
    pub activities: Option<PhaseSummary>,
    pub labeled_activities: usize,
    pub unlabeled_activity_ids: Vec<usize>,
}

pub fn summarize(run: &Run) -> RunSummary {
    RunSummary {
        version: run.version,
        corpus_digest: run.corpus_digest.clone(),
        source: run.corpus.source_descriptor.clone(),
        emails: run.corpus.len(),
        topics: run
            .topics
            .as_ref()
            .map(|t| PhaseSummary { clusters: t.clusters.len(), silhouette: Some(t.cut.silhouette) }),
        instances: run.instances.as_ref().map(|p| PhaseSummary { clusters: p.all().count(), silhouette: None }),
        activities: run.activities.as_ref().map(|p| PhaseSummary { clusters: p.all().count(), silhouette: None }),
        labeled_activities: run.labels.entries.len(),
        unlabeled_activity_ids: run.unlabeled(None).unwrap_or_default(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmailPreview {
    pub id: EmailId,
    pub sender: String,
    pub subject: String,
    pub timestamp: String,
}

fn preview(e: &Email) -> EmailPreview {
    EmailPreview {
        id: e.id,
        sender: e.sender.clone(),
        subject: e.subject.clone(),
        timestamp: export::format_event_time(&e.timestamp),
    }
}

fn previews(run: &Run, ids: &[EmailId]) -> Vec<EmailPreview> {
    ids.iter().filter_map(|id| run.corpus.get(*id)).map(preview).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicView {
    pub cluster_id: usize,
    pub label: Option<String>,
    pub email_ids: Vec<EmailId>,
    pub emails: Vec<EmailPreview>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DendrogramView {
    pub cut_k: usize,
    pub tree: DendrogramNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceView {
    pub instance_id: usize,
    pub email_ids: Vec<EmailId>,
    pub emails: Vec<EmailPreview>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityView {
    pub activity_id: usize,
    pub label: Option<String>,
    pub email_ids: Vec<EmailId>,
    pub medoid: Email,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicActivitiesView {
    pub topic_cluster_id: usize,
    pub k: usize,
    pub seed_instance_id: usize,
    pub stats: InstanceStats,
    pub sweep: Vec<SweepEntry>,
    pub activities: Vec<ActivityView>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct LabelBody {
    pub label: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelResponse {
    pub activity_id: usize,
    pub label: String,
    pub changed: bool,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RecutBody {
    pub phase: Phase,
    pub k: usize,
    #[serde(default)]
    pub topic_id: Option<usize>,
    #[serde(default = "default_true")]
    pub rerun: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
pub struct ClassifyBody {
    #[serde(default)]
    pub id: EmailId,
    #[serde(default)]
    pub sender: String,
    #[serde(default)]
    pub receivers: Vec<String>,
    #[serde(default)]
    pub subject: String,
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ExportQuery {
    pub topic: Option<usize>,
}

async fn get_run(State(s): State<Arc<AppState>>) -> Json<RunSummary> {
    Json(summarize(&*s.run.read().await))
}

async fn get_topics(State(s): State<Arc<AppState>>) -> ApiResult<Vec<TopicView>> {
    let run = s.run.read().await;
    let phase = run.topic_phase()?;
    Ok(Json(
        phase
            .clusters
            .iter()
            .map(|c| TopicView {
                cluster_id: c.cluster_id,
                label: run.labels.topic_labels.get(&c.cluster_id).cloned(),
                email_ids: c.email_ids.clone(),
                emails: previews(&run, &c.email_ids),
            })
            .collect(),
    ))
}

async fn get_topic_dendrogram(State(s): State<Arc<AppState>>) -> ApiResult<DendrogramView> {
    let run = s.run.read().await;
    let phase = run.topic_phase()?;
    Ok(Json(DendrogramView { cut_k: phase.cut.k, tree: phase.dendrogram.to_tree() }))
}

async fn get_instance_dendrogram(State(s): State<Arc<AppState>>, Path(id): Path<usize>) -> ApiResult<DendrogramView> {
    let run = s.run.read().await;
    let tree = run.dendrogram(Some(id))?.to_tree();
    let cut_k = run
        .instance_phase()?
        .topics
        .iter()
        .find(|t| t.topic_cluster_id == id)
        .map(|t| t.cut.k)
        .unwrap_or_default();
    Ok(Json(DendrogramView { cut_k, tree }))
}

async fn get_instances(State(s): State<Arc<AppState>>, Path(id): Path<usize>) -> ApiResult<Vec<InstanceView>> {
    let run = s.run.read().await;
    run.topic(id)?;
    let phase = run.instance_phase()?;
    Ok(Json(
        phase
            .all()
            .filter(|i| i.topic_cluster_id == id)
            .map(|i| InstanceView {
                instance_id: i.instance_id,
                email_ids: i.email_ids.clone(),
                emails: previews(&run, &i.email_ids),
            })
            .collect(),
    ))
}

async fn get_activities(State(s): State<Arc<AppState>>, Path(id): Path<usize>) -> ApiResult<TopicActivitiesView> {
    let run = s.run.read().await;
    run.topic(id)?;
    let phase = run.activity_phase()?;
    let topic = phase.of_topic(id).ok_or(RunError::UnknownTopic(id))?;
    let emails = run.emails_by_id();
    Ok(Json(TopicActivitiesView {
        topic_cluster_id: id,
        k: topic.k,
        seed_instance_id: topic.seed_instance_id,
        stats: topic.stats.clone(),
        sweep: topic.sweep.clone(),
        activities: topic
            .clusters
            .iter()
            .map(|a| ActivityView {
                activity_id: a.activity_id,
                label: run.labels.label(a.activity_id).map(str::to_string),
                email_ids: a.email_ids.clone(),
                medoid: emails[&a.medoid_id].clone(),
            })
            .collect(),
    }))
}

async fn put_label(
    State(s): State<Arc<AppState>>,
    Path(id): Path<usize>,
    Json(body): Json<LabelBody>,
) -> ApiResult<LabelResponse> {
    let _writer = s.writer.lock().await;
    if s.recut_in_flight() {
        return Err(ApiError::new(StatusCode::CONFLICT, "recut_in_progress", "a recut is in progress; retry later"));
    }
    let mut run = s.run.write().await;
    let mut next = run.clone();
    let changed = next.assign_label(id, &body.label, LabelSource::User)?;
    if changed {
        s.persist(&next)?;
        *run = next;
    }
    let label = run.labels.label(id).unwrap_or_default().to_string();
    Ok(Json(LabelResponse { activity_id: id, label, changed }))
}

async fn post_recut(State(s): State<Arc<AppState>>, Json(body): Json<RecutBody>) -> ApiResult<RunSummary> {
    let (guard, generation, snapshot) = {
        let _writer = s.writer.lock().await;
        let guard = s.recut_guard();
        let generation = s.generation.fetch_add(1, Ordering::SeqCst) + 1;
        (guard, generation, s.run.read().await.clone())
    };
    let computed = tokio::task::spawn_blocking(move || {
        let mut run = snapshot;
        run.recut(body.phase, body.k, body.topic_id, body.rerun).map(|_| run)
    })
    .await;
    let _writer = s.writer.lock().await;
    drop(guard);
    if s.generation.load(Ordering::SeqCst) != generation {
        return Err(ApiError::new(StatusCode::CONFLICT, "superseded", "a newer recut replaced this one"));
    }
    let run = computed.map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    s.persist(&run)?;
    let summary = summarize(&run);
    *s.run.write().await = run;
    Ok(Json(summary))
}

async fn post_classify(State(s): State<Arc<AppState>>, Json(body): Json<ClassifyBody>) -> ApiResult<ClassificationResult> {
    let timestamp = match &body.timestamp {
        Some(raw) => crate::ingest::parse_timestamp(raw)
            .ok_or_else(|| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_email", "unparseable timestamp"))?,
        None => DateTime::UNIX_EPOCH.fixed_offset(),
    };
    let email = Email {
        id: body.id,
        sender: body.sender,
        receivers: body.receivers,
        subject: body.subject,
        body: body.body,
        timestamp,
    };
    let run = s.run.read().await;
    let mut results = run.classify(std::slice::from_ref(&email))?;
    Ok(Json(results.remove(0)))
}

async fn get_export(
    State(s): State<Arc<AppState>>,
    Path(format): Path<String>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    let format: ExportFormat =
        format.parse().map_err(|m: String| ApiError::new(StatusCode::NOT_FOUND, "unknown_format", m))?;
    let run = s.run.read().await;
    let text = export::render(&run, q.topic, format)?;
    Ok(([(header::CONTENT_TYPE, format.content_type())], text).into_response())
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/run", get(get_run))
        .route("/topics", get(get_topics))
        .route("/dendrogram", get(get_topic_dendrogram))
        .route("/topics/{id}/dendrogram", get(get_instance_dendrogram))
        .route("/topics/{id}/instances", get(get_instances))
        .route("/topics/{id}/activities", get(get_activities))
        .route("/activities/{id}/label", put(put_label))
        .route("/recut", post(post_recut))
        .route("/classify", post(post_classify))
        .route("/export/{format}", get(get_export));
    Router::new().nest("/api/v1", api).fallback(fallback).with_state(state)
}

/// Serves `run_path` until ctrl-c.
pub async fn serve(run_path: PathBuf, addr: SocketAddr) -> Result<(), RunError> {
    let run = Run::load(&run_path)?;
    let state = AppState::new(run, Some(run_path.clone()));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| RunError::Io { path: addr.to_string(), source })?;
    let local = listener.local_addr().map_err(|source| RunError::Io { path: addr.to_string(), source })?;
    eprintln!("serving {} on http://{local}/api/v1", run_path.display());
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| RunError::Io { path: local.to_string(), source })
}

/// Label counts per topic, handy for progress displays.
pub fn label_progress(run: &Run) -> BTreeMap<usize, (usize, usize)> {
    let mut out = BTreeMap::new();
    if let Some(phase) = &run.activities {
        for t in &phase.topics {
            let total = t.clusters.len();
            let done = total - run.labels.unlabeled(&t.clusters).len();
            out.insert(t.topic_cluster_id, (done, total));
        }
    }
    out
}
