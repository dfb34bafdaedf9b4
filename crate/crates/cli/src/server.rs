//! JSON-over-HTTP session service.
//!
//! Each session sits behind its own mutex and every operation runs on the
//! blocking pool while holding it, so requests on one session are applied
//! one after another while different sessions proceed in parallel.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use crewplan_core::encode::OverrideMode;
use crewplan_core::io::parse_instance;
use crewplan_core::model::Instance;
use crewplan_core::session::{Event, GanttData, HistoryEntry, Mode, Session, SessionConfig, SessionError};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Session(SessionError),
    BadRequest(String),
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::BadRequest(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
            ApiError::Session(e) => match e {
                SessionError::WrongMode { .. } | SessionError::NoSolution => StatusCode::CONFLICT,
                SessionError::BudgetExceeded => StatusCode::REQUEST_TIMEOUT,
                SessionError::Optimize(crewplan_core::optimize::OptimizeError::Sat(_))
                | SessionError::Explain(crewplan_core::explain::ExplainError::Sat(_)) => {
                    StatusCode::INTERNAL_SERVER_ERROR
                }
                _ => StatusCode::UNPROCESSABLE_ENTITY,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            ApiError::NotFound(_) => "not_found",
            ApiError::BadRequest(_) => "invalid",
            ApiError::Internal(_) => "internal",
            ApiError::Session(SessionError::WrongMode { .. }) => "wrong_mode",
            ApiError::Session(SessionError::BudgetExceeded) => "budget_exceeded",
            ApiError::Session(_) => "rejected",
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError::Session(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let message = match &self {
            ApiError::NotFound(m) | ApiError::BadRequest(m) | ApiError::Internal(m) => m.clone(),
            ApiError::Session(e) => e.to_string(),
        };
        let mut body = json!({ "error": message, "kind": self.kind() });
        if let ApiError::Session(SessionError::WrongMode { mode, .. }) = &self {
            body["mode"] = json!(mode);
        }
        (self.status(), Json(body)).into_response()
    }
}

type SessionHandle = Arc<Mutex<Session>>;

pub struct AppState {
    instances: RwLock<HashMap<String, Arc<Instance>>>,
    sessions: RwLock<HashMap<String, SessionHandle>>,
    next_instance: AtomicU64,
    next_session: AtomicU64,
    data_dir: Option<PathBuf>,
    defaults: SessionConfig,
}

impl AppState {
    pub fn new(defaults: SessionConfig, data_dir: Option<PathBuf>) -> std::io::Result<Arc<Self>> {
        let state = AppState {
            instances: RwLock::default(),
            sessions: RwLock::default(),
            next_instance: AtomicU64::new(1),
            next_session: AtomicU64::new(1),
            data_dir,
            defaults,
        };
        state.restore()?;
        Ok(Arc::new(state))
    }

    /// Reloads instances and sessions snapshotted in the data directory.
    fn restore(&self) -> std::io::Result<()> {
        let Some(dir) = &self.data_dir else { return Ok(()) };
        for sub in ["instances", "sessions"] {
            std::fs::create_dir_all(dir.join(sub))?;
        }
        for (id, text) in read_snapshots(&dir.join("instances"))? {
            if let Ok(inst) = parse_instance(&text) {
                bump(&self.next_instance, &id);
                self.instances.write().expect("instances lock").insert(id, Arc::new(inst));
            }
        }
        for (id, text) in read_snapshots(&dir.join("sessions"))? {
            if let Ok(s) = serde_json::from_str::<Session>(&text) {
                bump(&self.next_session, &id);
                self.sessions.write().expect("sessions lock").insert(id, Arc::new(Mutex::new(s)));
            }
        }
        Ok(())
    }

    fn persist(&self, sub: &str, id: &str, text: &str) -> Result<(), ApiError> {
        let Some(dir) = &self.data_dir else { return Ok(()) };
        let path = dir.join(sub).join(format!("{id}.json"));
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text)
            .and_then(|_| std::fs::rename(&tmp, &path))
            .map_err(|e| ApiError::Internal(format!("cannot write snapshot {}: {e}", path.display())))
    }

    fn instance(&self, id: &str) -> Result<Arc<Instance>, ApiError> {
        self.instances
            .read()
            .expect("instances lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("unknown instance {id}")))
    }

    fn session(&self, id: &str) -> Result<SessionHandle, ApiError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("unknown session {id}")))
    }
}

fn read_snapshots(dir: &Path) -> std::io::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            if let Some(id) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((id.to_string(), std::fs::read_to_string(&path)?));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Keeps generated ids ahead of restored ones (`i7` -> next is at least 8).
fn bump(counter: &AtomicU64, id: &str) {
    if let Ok(n) = id[1..].parse::<u64>() {
        counter.fetch_max(n + 1, Ordering::SeqCst);
    }
}

/// What every session endpoint returns: the snapshot, its mode and the Gantt view.
#[derive(Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub mode: Mode,
    pub session: Session,
    pub gantt: Option<GanttData>,
}

fn view(id: &str, s: &mut Session) -> SessionView {
    let gantt = s.gantt_view().ok();
    SessionView { id: id.to_string(), mode: s.mode, session: s.clone(), gantt }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let text = if body.is_empty() { &b"{}"[..] } else { &body[..] };
    serde_json::from_slice(text).map_err(|e| ApiError::BadRequest(format!("bad request body: {e}")))
}

/// Runs `op` on the session while holding its lock, off the async workers.
async fn with_session<T, F>(state: &Arc<AppState>, id: String, op: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&str, &mut Session) -> Result<T, ApiError> + Send + 'static,
{
    let handle = state.session(&id)?;
    let state = state.clone();
    tokio::task::spawn_blocking(move || {
        let mut s = handle.lock().unwrap_or_else(|p| p.into_inner());
        let out = op(&id, &mut s)?;
        state.persist("sessions", &id, &serde_json::to_string(&*s).expect("session serializes"))?;
        Ok(out)
    })
    .await
    .map_err(|e| ApiError::Internal(format!("worker failed: {e}")))?
}

async fn apply_event(state: &Arc<AppState>, id: String, event: Event) -> Result<Json<SessionView>, ApiError> {
    with_session(state, id, move |id, s| {
        s.apply(event)?;
        Ok(Json(view(id, s)))
    })
    .await
}

async fn upload_instance(State(state): State<Arc<AppState>>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::BadRequest("instance is not UTF-8".into()))?;
    let inst = parse_instance(text).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let id = format!("i{}", state.next_instance.fetch_add(1, Ordering::SeqCst));
    state.persist("instances", &id, text)?;
    let summary = json!({
        "id": id,
        "activities": inst.activities.len(),
        "teams": inst.teams.len(),
    });
    state.instances.write().expect("instances lock").insert(id, Arc::new(inst));
    Ok((StatusCode::CREATED, Json(summary)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    instance_id: String,
    #[serde(default)]
    config: Option<SessionConfig>,
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let inst = state.instance(&req.instance_id)?;
    let config = req.config.unwrap_or_else(|| state.defaults.clone());
    let id = format!("s{}", state.next_session.fetch_add(1, Ordering::SeqCst));
    let st = state.clone();
    let out = tokio::task::spawn_blocking(move || -> Result<SessionView, ApiError> {
        let mut s = Session::start((*inst).clone(), config)?;
        let v = view(&id, &mut s);
        st.persist("sessions", &id, &serde_json::to_string(&s).expect("session serializes"))?;
        st.sessions.write().expect("sessions lock").insert(id, Arc::new(Mutex::new(s)));
        Ok(v)
    })
    .await
    .map_err(|e| ApiError::Internal(format!("worker failed: {e}")))??;
    Ok((StatusCode::CREATED, Json(out)))
}

async fn get_session(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ApiError> {
    with_session(&state, id, |id, s| Ok(Json(view(id, s)))).await
}

async fn get_gantt(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<GanttData>, ApiError> {
    with_session(&state, id, |_, s| Ok(Json(s.gantt_view()?))).await
}

async fn get_history(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Vec<HistoryEntry>>, ApiError> {
    with_session(&state, id, |_, s| Ok(Json(s.history.clone()))).await
}

async fn solve(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ApiError> {
    apply_event(&state, id, Event::Solve).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideBody {
    activity: String,
    team: String,
    mode: OverrideMode,
}

async fn add_override(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let b: OverrideBody = parse_body(&body)?;
    apply_event(&state, id, Event::ApplyOverride { activity: b.activity, team: b.team, mode: b.mode }).await
}

async fn local_begin(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ApiError> {
    apply_event(&state, id, Event::BeginLocalResolution).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelBody {
    label: String,
}

async fn local_resolve(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let b: LabelBody = parse_body(&body)?;
    apply_event(&state, id, Event::ResolveLocal { label: b.label }).await
}

async fn global_begin(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ApiError> {
    apply_event(&state, id, Event::BeginGlobalResolution).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelsBody {
    labels: Vec<String>,
}

async fn global_accept(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let b: LabelsBody = parse_body(&body)?;
    apply_event(&state, id, Event::AcceptCorrections { labels: b.labels }).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsBody {
    #[serde(default)]
    weights: BTreeMap<String, u64>,
}

async fn priorities(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let b: WeightsBody = parse_body(&body)?;
    apply_event(&state, id, Event::TunePriorities { weights: b.weights }).await
}

async fn priorities_accept(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionView>, ApiError> {
    apply_event(&state, id, Event::AcceptRelaxedSolution).await
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/instances", post(upload_instance))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/solve", post(solve))
        .route("/sessions/{id}/overrides", post(add_override))
        .route("/sessions/{id}/resolution/local/begin", post(local_begin))
        .route("/sessions/{id}/resolution/local/resolve", post(local_resolve))
        .route("/sessions/{id}/resolution/global/begin", post(global_begin))
        .route("/sessions/{id}/resolution/global/accept", post(global_accept))
        .route("/sessions/{id}/priorities", post(priorities))
        .route("/sessions/{id}/priorities/accept", post(priorities_accept))
        .route("/sessions/{id}/gantt", get(get_gantt))
        .route("/sessions/{id}/history", get(get_history))
        .with_state(state)
}

pub async fn serve(port: u16, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
