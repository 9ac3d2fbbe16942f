//! HTTP/JSON API over sessions.
//!
//! Mutations run on the blocking pool as jobs. Each session accepts one
//! mutation at a time; a second one is rejected with 409 while the first is
//! running. Reads always see the last completed snapshot.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use featlab_core::numfmt::Sig12;
use featlab_core::selection::SortKey;
use featlab_core::session::SessionSettings;
use featlab_core::{set_thresholds, ActionRequest, Operator, Scope, Slice, SessionState, Technique};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::SessionConfig;

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
    Conflict(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, msg) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(json!({ "error": msg }))).into_response()
    }
}

impl From<featlab_core::Error> for ApiError {
    fn from(e: featlab_core::Error) -> Self {
        ApiError::BadRequest(e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct SessionSlot {
    state: RwLock<Arc<SessionState>>,
    busy: AtomicBool,
}

impl SessionSlot {
    fn new(state: SessionState) -> Self {
        Self {
            state: RwLock::new(Arc::new(state)),
            busy: AtomicBool::new(false),
        }
    }

    fn snapshot(&self) -> Arc<SessionState> {
        self.state.read().expect("session lock").clone()
    }

    fn replace(&self, next: SessionState) {
        *self.state.write().expect("session lock") = Arc::new(next);
    }
}

/// Holds a session's mutation slot until dropped.
struct BusyGuard(Arc<SessionSlot>);

impl BusyGuard {
    fn acquire(slot: &Arc<SessionSlot>, id: u64) -> ApiResult<Self> {
        slot.busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .map(|_| BusyGuard(slot.clone()))
            .map_err(|_| ApiError::Conflict(format!("session {id} is busy with another mutation")))
    }
}

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.0.busy.store(false, Ordering::Release);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Succeeded,
    Failed,
}

struct Job {
    kind: &'static str,
    session_id: Option<u64>,
    started: Instant,
    elapsed: Option<Duration>,
    status: JobStatus,
    result: Option<Value>,
    error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct JobView {
    pub id: u64,
    pub kind: &'static str,
    pub session_id: Option<u64>,
    pub status: JobStatus,
    pub elapsed_ms: u64,
    pub result: Option<Value>,
    pub error: Option<String>,
}

/// Shared server state.
#[derive(Default)]
pub struct AppState {
    sessions: RwLock<BTreeMap<u64, Arc<SessionSlot>>>,
    jobs: Mutex<BTreeMap<u64, Job>>,
    next_session: AtomicU64,
    next_job: AtomicU64,
}

impl AppState {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    /// Registers an already evaluated session and returns its id.
    pub fn insert_session(&self, state: SessionState) -> u64 {
        let id = self.next_session.fetch_add(1, Ordering::Relaxed) + 1;
        self.sessions.write().expect("sessions lock").insert(id, Arc::new(SessionSlot::new(state)));
        id
    }

    fn slot(&self, id: u64) -> ApiResult<Arc<SessionSlot>> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(&id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no session {id}")))
    }

    /// Current snapshot of a session.
    pub fn snapshot(&self, id: u64) -> Option<Arc<SessionState>> {
        self.slot(id).ok().map(|s| s.snapshot())
    }

    fn start_job(&self, kind: &'static str, session_id: Option<u64>) -> u64 {
        let id = self.next_job.fetch_add(1, Ordering::Relaxed) + 1;
        self.jobs.lock().expect("jobs lock").insert(
            id,
            Job {
                kind,
                session_id,
                started: Instant::now(),
                elapsed: None,
                status: JobStatus::Running,
                result: None,
                error: None,
            },
        );
        id
    }

    fn finish_job(&self, id: u64, outcome: &Result<(Option<u64>, Value), String>) {
        let mut jobs = self.jobs.lock().expect("jobs lock");
        if let Some(job) = jobs.get_mut(&id) {
            job.elapsed = Some(job.started.elapsed());
            match outcome {
                Ok((sid, v)) => {
                    job.status = JobStatus::Succeeded;
                    job.session_id = job.session_id.or(*sid);
                    job.result = Some(v.clone());
                }
                Err(e) => {
                    job.status = JobStatus::Failed;
                    job.error = Some(e.clone());
                }
            }
        }
    }

    pub fn job(&self, id: u64) -> Option<JobView> {
        let jobs = self.jobs.lock().expect("jobs lock");
        jobs.get(&id).map(|j| JobView {
            id,
            kind: j.kind,
            session_id: j.session_id,
            status: j.status,
            elapsed_ms: j.elapsed.unwrap_or_else(|| j.started.elapsed()).as_millis() as u64,
            result: j.result.clone(),
            error: j.error.clone(),
        })
    }
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/load", post(load_session))
        .route("/sessions/{id}", get(session_summary))
        .route("/sessions/{id}/report", get(get_report))
        .route("/sessions/{id}/data-space", get(data_space))
        .route("/sessions/{id}/thresholds", put(put_thresholds))
        .route("/sessions/{id}/importance", get(importance))
        .route("/sessions/{id}/include", post(include))
        .route("/sessions/{id}/exclude", post(exclude))
        .route("/sessions/{id}/statistics", get(statistics))
        .route("/sessions/{id}/graph", get(graph))
        .route("/sessions/{id}/features/{name}/transforms", get(transforms))
        .route("/sessions/{id}/transform", post(apply_transform))
        .route("/sessions/{id}/candidates", post(candidates))
        .route("/sessions/{id}/adopt", post(adopt))
        .route("/sessions/{id}/log", get(action_log))
        .route("/sessions/{id}/export", post(export))
        .route("/sessions/{id}/save", post(save))
        .route("/jobs/{id}", get(get_job))
        .with_state(app)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: &str, app: Arc<AppState>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(app)).await?;
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
struct WaitQuery {
    #[serde(default)]
    wait: bool,
}

type Work = Box<dyn FnOnce() -> Result<(Option<u64>, Value), String> + Send>;

/// Runs `work` on the blocking pool as a job. With `wait` the handler
/// returns the job's result directly.
async fn run_job(app: Arc<AppState>, kind: &'static str, session_id: Option<u64>, wait: bool, ok: StatusCode, work: Work) -> ApiResult<Response> {
    let job_id = app.start_job(kind, session_id);
    let app2 = app.clone();
    let handle = tokio::task::spawn_blocking(move || {
        let outcome = work();
        app2.finish_job(job_id, &outcome);
        outcome
    });
    if !wait {
        return Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job_id, "status": JobStatus::Running }))).into_response());
    }
    match handle.await {
        Ok(Ok((_, v))) => Ok((ok, Json(v)).into_response()),
        Ok(Err(e)) => Err(ApiError::BadRequest(e)),
        Err(e) => Err(ApiError::Internal(e.to_string())),
    }
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    Query(q): Query<WaitQuery>,
    body: Result<Json<SessionConfig>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(cfg) = body?;
    let settings = cfg.settings(None)?;
    let source = cfg.source();
    let app2 = app.clone();
    let work: Work = Box::new(move || {
        let state = SessionState::open(source, settings).map_err(|e| e.to_string())?;
        let report = serde_json::to_value(state.report()).map_err(|e| e.to_string())?;
        let id = app2.insert_session(state);
        Ok((Some(id), json!({ "session_id": id, "report": report })))
    });
    run_job(app, "create_session", None, q.wait, StatusCode::CREATED, work).await
}

#[derive(Debug, Deserialize)]
struct PathBody {
    path: PathBuf,
}

async fn load_session(
    State(app): State<Arc<AppState>>,
    Query(q): Query<WaitQuery>,
    body: Result<Json<PathBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(PathBody { path }) = body?;
    let app2 = app.clone();
    let work: Work = Box::new(move || {
        let state = featlab_core::load_session(&path).map_err(|e| e.to_string())?;
        let report = serde_json::to_value(state.report()).map_err(|e| e.to_string())?;
        let id = app2.insert_session(state);
        Ok((Some(id), json!({ "session_id": id, "report": report })))
    });
    run_job(app, "load_session", None, q.wait, StatusCode::CREATED, work).await
}

async fn list_sessions(State(app): State<Arc<AppState>>) -> Json<Value> {
    let ids: Vec<u64> = app.sessions.read().expect("sessions lock").keys().copied().collect();
    Json(json!({ "sessions": ids }))
}

#[derive(Serialize)]
struct SessionSummary<'a> {
    id: u64,
    n_rows: usize,
    target: &'a str,
    class_names: &'a [String],
    class_counts: Vec<usize>,
    features: Vec<&'a str>,
    active_features: Vec<String>,
    settings: &'a SessionSettings,
    metrics: featlab_core::CvMetrics,
    best_ordinal: usize,
    #[serde(serialize_with = "featlab_core::numfmt::sig12")]
    best_combined_score: f64,
    n_actions: usize,
}

async fn session_summary(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Json<Value>> {
    let s = app.slot(id)?.snapshot();
    let ds = s.dataset();
    let summary = SessionSummary {
        id,
        n_rows: ds.n_rows(),
        target: ds.target_name(),
        class_names: ds.class_names(),
        class_counts: ds.class_counts(),
        features: ds.feature_names().collect(),
        active_features: ds.active_names(),
        settings: s.settings(),
        metrics: s.report().metrics,
        best_ordinal: s.best().ordinal,
        best_combined_score: s.best().combined_score,
        n_actions: s.log().len(),
    };
    to_json(&summary)
}

fn to_json<T: Serialize>(v: &T) -> ApiResult<Json<Value>> {
    serde_json::to_value(v).map(Json).map_err(|e| ApiError::Internal(e.to_string()))
}

async fn get_report(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Json<Value>> {
    to_json(app.slot(id)?.snapshot().report())
}

#[derive(Serialize)]
struct Point {
    row: usize,
    class: usize,
    probability: Sig12,
    slice: Slice,
    /// Vertical offset in [0, 1) for the strip plot.
    jitter: Sig12,
}

fn slice_counts(state: &SessionState) -> BTreeMap<String, usize> {
    Slice::ALL
        .iter()
        .map(|&s| (s.to_string(), state.partition().count(s)))
        .collect()
}

fn thresholds_json(state: &SessionState) -> Value {
    let t = state.settings().thresholds;
    json!({ "low": t.low(), "fixed": featlab_core::SliceThresholds::FIXED, "high": t.high() })
}

async fn data_space(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Json<Value>> {
    let s = app.slot(id)?.snapshot();
    let mut rng = ChaCha8Rng::seed_from_u64(s.settings().budget.rng_seed);
    let target = s.dataset().target();
    let points: Vec<Point> = s
        .report()
        .probabilities
        .iter()
        .zip(&s.partition().assignment)
        .enumerate()
        .map(|(row, (&p, &slice))| Point {
            row,
            class: target[row],
            probability: Sig12(p),
            slice,
            jitter: Sig12(rng.gen::<f64>()),
        })
        .collect();
    Ok(Json(json!({
        "thresholds": thresholds_json(&s),
        "counts": slice_counts(&s),
        "points": points,
    })))
}

#[derive(Debug, Deserialize)]
struct ThresholdBody {
    low: i64,
    high: i64,
}

async fn put_thresholds(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    body: Result<Json<ThresholdBody>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let Json(b) = body?;
    let thresholds = set_thresholds(b.low, b.high)?;
    let slot = app.slot(id)?;
    let _guard = BusyGuard::acquire(&slot, id)?;
    let next = slot.snapshot().with_thresholds(thresholds)?;
    let out = json!({ "thresholds": thresholds_json(&next), "counts": slice_counts(&next) });
    slot.replace(next);
    Ok(Json(out))
}

#[derive(Debug, Default, Deserialize)]
struct SortQuery {
    sort: Option<String>,
}

async fn importance(State(app): State<Arc<AppState>>, Path(id): Path<u64>, Query(q): Query<SortQuery>) -> ApiResult<Json<Value>> {
    let s = app.slot(id)?.snapshot();
    let key = match q.sort.as_deref() {
        None => s.table().sort,
        Some(k) if k.eq_ignore_ascii_case("average") => SortKey::Average,
        Some(k) => SortKey::Technique(Technique::parse(k)?),
    };
    let order: Vec<String> = s.dataset().feature_names().map(str::to_owned).collect();
    to_json(&s.table().sorted(key, &order))
}

#[derive(Debug, Deserialize)]
struct FeatureBody {
    feature: String,
}

async fn mutate(app: Arc<AppState>, id: u64, wait: bool, kind: &'static str, action: ActionRequest) -> ApiResult<Response> {
    let slot = app.slot(id)?;
    let guard = BusyGuard::acquire(&slot, id)?;
    let current = slot.snapshot();
    current.check_action(&action)?;
    let work: Work = Box::new(move || {
        let next = current.apply_action(&action).map_err(|e| e.to_string())?;
        let report = serde_json::to_value(next.report()).map_err(|e| e.to_string())?;
        slot.replace(next);
        drop(guard);
        Ok((Some(id), report))
    });
    run_job(app, kind, Some(id), wait, StatusCode::OK, work).await
}

async fn include(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Query(q): Query<WaitQuery>,
    body: Result<Json<FeatureBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(b) = body?;
    mutate(app, id, q.wait, "include", ActionRequest::Include { feature: b.feature }).await
}

async fn exclude(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Query(q): Query<WaitQuery>,
    body: Result<Json<FeatureBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(b) = body?;
    mutate(app, id, q.wait, "exclude", ActionRequest::Exclude { feature: b.feature }).await
}

#[derive(Debug, Default, Deserialize)]
struct ScopeQuery {
    slice: Option<String>,
    min_cor: Option<f64>,
}

fn scope_of(q: &ScopeQuery) -> ApiResult<Scope> {
    Ok(match q.slice.as_deref() {
        None => Scope::All,
        Some(s) => Scope::parse(s)?,
    })
}

async fn statistics(State(app): State<Arc<AppState>>, Path(id): Path<u64>, Query(q): Query<ScopeQuery>) -> ApiResult<Json<Value>> {
    let s = app.slot(id)?.snapshot();
    let bundle = s.statistics();
    match q.slice.as_deref() {
        None => to_json(&bundle),
        Some(_) => {
            let scope = scope_of(&q)?.to_string();
            to_json(&bundle.get(&scope))
        }
    }
}

async fn graph(State(app): State<Arc<AppState>>, Path(id): Path<u64>, Query(q): Query<ScopeQuery>) -> ApiResult<Json<Value>> {
    let s = app.slot(id)?.snapshot();
    let scope = scope_of(&q)?;
    let min_cor = q.min_cor.unwrap_or(s.settings().min_cor);
    let edges = s.graph(scope, Some(min_cor))?;
    Ok(Json(json!({
        "slice": scope.to_string(),
        "min_cor": Sig12(min_cor),
        "nodes": s.dataset().active_names(),
        "edges": edges,
    })))
}

async fn transforms(
    State(app): State<Arc<AppState>>,
    Path((id, name)): Path<(u64, String)>,
    Query(q): Query<ScopeQuery>,
) -> ApiResult<Json<Value>> {
    let s = app.slot(id)?.snapshot();
    let scope = scope_of(&q)?;
    let values = s.dataset().values(&name)?;
    let applicable = s.registry().list_transforms(values);
    let impact = s.transform_impact(&name, scope)?;
    Ok(Json(json!({
        "feature": name,
        "slice": scope.to_string(),
        "applicable": applicable,
        "impact": impact,
    })))
}

#[derive(Debug, Deserialize)]
struct TransformBody {
    feature: String,
    transform: String,
}

async fn apply_transform(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Query(q): Query<WaitQuery>,
    body: Result<Json<TransformBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(b) = body?;
    let action = ActionRequest::Transform {
        feature: b.feature,
        transform: b.transform,
    };
    mutate(app, id, q.wait, "transform", action).await
}

#[derive(Debug, Deserialize)]
struct CandidatesBody {
    features: Vec<String>,
    /// Also score the candidates next to the active features.
    #[serde(default)]
    compare: bool,
}

async fn candidates(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    body: Result<Json<CandidatesBody>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let Json(b) = body?;
    let s = app.slot(id)?.snapshot();
    let selected: Vec<&str> = b.features.iter().map(String::as_str).collect();
    let list = s.candidates(&selected)?;
    if !b.compare {
        return Ok(Json(json!({ "candidates": list })));
    }
    let features = b.features.clone();
    let table = tokio::task::spawn_blocking(move || {
        let selected: Vec<&str> = features.iter().map(String::as_str).collect();
        s.candidate_table(&selected)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(json!({ "candidates": list, "table": table })))
}

#[derive(Debug, Deserialize)]
struct AdoptBody {
    sources: Vec<String>,
    ops: Vec<Operator>,
}

async fn adopt(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Query(q): Query<WaitQuery>,
    body: Result<Json<AdoptBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(b) = body?;
    mutate(app, id, q.wait, "adopt", ActionRequest::Generate { sources: b.sources, ops: b.ops }).await
}

async fn action_log(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Json<Value>> {
    let s = app.slot(id)?.snapshot();
    Ok(Json(json!({
        "history": s.history(),
        "best_ordinal": s.best().ordinal,
        "best_combined_score": Sig12(s.best().combined_score),
    })))
}

async fn export(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    body: Result<Json<PathBody>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let Json(PathBody { path }) = body?;
    let s = app.slot(id)?.snapshot();
    let sidecar = s.export_best(&path)?;
    Ok(Json(json!({ "csv": path, "sidecar": sidecar, "best_ordinal": s.best().ordinal })))
}

async fn save(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    body: Result<Json<PathBody>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let Json(PathBody { path }) = body?;
    let s = app.slot(id)?.snapshot();
    featlab_core::save_session(&s, &path)?;
    Ok(Json(json!({ "path": path })))
}

async fn get_job(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult<Json<JobView>> {
    app.job(id).map(Json).ok_or_else(|| ApiError::NotFound(format!("no job {id}")))
}
