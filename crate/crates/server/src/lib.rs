//! Session service: create and drive sessions over HTTP, stream their
//! events, browse their working directories.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | /sessions | `{task?, config?, id?, breakpoints?, paused?}` |
//! | GET | /sessions | |
//! | GET | /sessions/{id} | status |
//! | GET | /sessions/{id}/result | |
//! | POST | /sessions/{id}/message | `{agent, text}` |
//! | GET | /sessions/{id}/events | `?after=&agent=&kind=&wait_ms=` |
//! | POST | /sessions/{id}/pause, /resume | |
//! | GET, POST | /sessions/{id}/breakpoints | `[{agent, kind}]` |
//! | GET | /sessions/{id}/graph | |
//! | GET | /sessions/{id}/files | `?path=` |
//! | GET | /sessions/{id}/export/notebook | |

mod worker;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use qflow_core::agent::{Breakpoint, SessionError};
use qflow_core::config::{Config, RunOptions};
use qflow_core::trace::{export_notebook, ActionEvent, EventFilter, EventKind};
use qflow_core::util::safe_join;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use worker::SessionEntry;

/// Longest an events request may wait for new events.
pub const MAX_WAIT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// One subdirectory per session.
    pub sessions_dir: PathBuf,
    /// Used when a create request names no config.
    pub default_config: Option<PathBuf>,
    /// Serve raw model replies with events.
    pub expose_raw: bool,
    /// Pause between steps, so a UI can follow along.
    pub step_delay: Duration,
}

impl ServerConfig {
    pub fn new(sessions_dir: impl Into<PathBuf>) -> Self {
        Self {
            sessions_dir: sessions_dir.into(),
            default_config: None,
            expose_raw: false,
            step_delay: Duration::ZERO,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    config: Arc<ServerConfig>,
    sessions: Arc<RwLock<BTreeMap<String, Arc<SessionEntry>>>>,
}

impl AppState {
    pub fn new(config: ServerConfig) -> Self {
        Self {
            config: Arc::new(config),
            sessions: Arc::default(),
        }
    }

    pub fn session(&self, id: &str) -> Option<Arc<SessionEntry>> {
        self.sessions.read().expect("sessions lock").get(id).cloned()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(session_status))
        .route("/sessions/{id}/result", get(session_result))
        .route("/sessions/{id}/message", post(post_message))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/pause", post(pause))
        .route("/sessions/{id}/resume", post(resume))
        .route("/sessions/{id}/breakpoints", get(get_breakpoints).post(set_breakpoints))
        .route("/sessions/{id}/graph", get(graph))
        .route("/sessions/{id}/files", get(files))
        .route("/sessions/{id}/export/notebook", get(export))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl ApiError {
    fn bad(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::BAD_REQUEST, msg.into())
    }

    fn not_found(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::NOT_FOUND, msg.into())
    }

    fn conflict(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::CONFLICT, msg.into())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let code = match e {
            SessionError::UnknownAgent(_) => StatusCode::BAD_REQUEST,
            SessionError::Finished(_) | SessionError::NotPaused => StatusCode::CONFLICT,
            SessionError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn entry(state: &AppState, id: &str) -> ApiResult<Arc<SessionEntry>> {
    state.session(id).ok_or_else(|| ApiError::not_found(format!("no session {id:?}")))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub task: Option<String>,
    /// Config file path; the server default when absent.
    pub config: Option<PathBuf>,
    pub id: Option<String>,
    #[serde(default)]
    pub breakpoints: Vec<Breakpoint>,
    /// Pause at the first step boundary.
    #[serde(default)]
    pub paused: bool,
}

#[derive(Debug, Serialize)]
struct SessionMeta<'a> {
    id: &'a str,
    created: &'a str,
    task: &'a str,
    config: &'a Path,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

async fn create_session(State(state): State<AppState>, Json(req): Json<CreateSession>) -> ApiResult<impl IntoResponse> {
    let config_path = req
        .config
        .clone()
        .or_else(|| state.config.default_config.clone())
        .ok_or_else(|| ApiError::bad("no config given and the server has no default"))?;
    let config = Config::load(&config_path).map_err(|e| ApiError::bad(e.to_string()))?;
    // surface hierarchy problems before anything touches the disk
    config.hierarchy().map_err(|e| ApiError::bad(e.to_string()))?;

    let created = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
    let entry = {
        let mut sessions = state.sessions.write().expect("sessions lock");
        let id = match &req.id {
            Some(id) if !valid_id(id) => return Err(ApiError::bad(format!("invalid session id {id:?}"))),
            Some(id) => id.clone(),
            None => (sessions.len() + 1..)
                .map(|n| format!("s{n:04}"))
                .find(|id| !sessions.contains_key(id) && !state.config.sessions_dir.join(id).exists())
                .expect("free id"),
        };
        let root = state.config.sessions_dir.join(&id);
        if sessions.contains_key(&id) || root.exists() {
            return Err(ApiError::conflict(format!("session {id:?} already exists")));
        }
        let opts = RunOptions {
            id: id.clone(),
            task: req.task.clone(),
            session_root: root.clone(),
            ..Default::default()
        };
        let mut session = config.build(&opts).map_err(|e| ApiError::bad(e.to_string()))?;
        session.set_breakpoints(req.breakpoints.clone())?;
        if req.paused {
            session.request_pause()?;
        }
        let task = req.task.clone().or_else(|| config.session.task.clone()).unwrap_or_default();
        let meta = SessionMeta { id: &id, created: &created, task: &task, config: &config_path };
        std::fs::write(root.join("session.json"), serde_json::to_string_pretty(&meta).expect("meta serializes"))
            .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        let entry = Arc::new(SessionEntry::new(
            session,
            created,
            task,
            state.config.expose_raw || config.session.expose_raw,
        ));
        sessions.insert(id, entry.clone());
        entry
    };
    worker::spawn(entry.clone(), state.config.step_delay);
    Ok((StatusCode::CREATED, Json(entry.describe())))
}

async fn list_sessions(State(state): State<AppState>) -> Json<Value> {
    let sessions = state.sessions.read().expect("sessions lock");
    Json(json!(sessions.values().map(|e| e.summary()).collect::<Vec<_>>()))
}

async fn session_status(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    Ok(Json(entry(&state, &id)?.describe()))
}

async fn session_result(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let e = entry(&state, &id)?;
    let result = e.with(|s| s.result());
    Ok(Json(serde_json::to_value(result).expect("results serialize")))
}

#[derive(Debug, Deserialize)]
pub struct PostMessage {
    pub agent: String,
    pub text: String,
}

async fn post_message(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(msg): Json<PostMessage>,
) -> ApiResult<StatusCode> {
    let e = entry(&state, &id)?;
    e.with(|s| s.post_message(&msg.agent, &msg.text))?;
    e.wake();
    Ok(StatusCode::ACCEPTED)
}

#[derive(Debug, Default, Deserialize)]
pub struct EventQuery {
    #[serde(default)]
    pub after: u64,
    pub agent: Option<String>,
    pub kind: Option<String>,
    /// Wait up to this long for a first matching event.
    #[serde(default)]
    pub wait_ms: u64,
}

fn event_json(e: &ActionEvent, expose_raw: bool) -> Value {
    let mut v = serde_json::to_value(e).expect("events serialize");
    if !expose_raw {
        if let Some(o) = v.as_object_mut() {
            o.remove("raw");
        }
    }
    v
}

async fn events(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<EventQuery>,
) -> ApiResult<Json<Value>> {
    let e = entry(&state, &id)?;
    let kind = q
        .kind
        .as_deref()
        .map(|k| serde_json::from_value::<EventKind>(json!(k)).map_err(|_| ApiError::bad(format!("unknown event kind {k:?}"))))
        .transpose()?;
    let filter = EventFilter { agent: q.agent.clone(), kind };
    let deadline = tokio::time::Instant::now() + Duration::from_millis(q.wait_ms).min(MAX_WAIT);
    let mut changes = e.subscribe();
    loop {
        let (found, last_seq, st) = e.with(|s| {
            let found: Vec<Value> = s.trace().after(q.after, &filter).into_iter().map(|ev| event_json(ev, e.expose_raw)).collect();
            (found, s.trace().events().last().map_or(0, |ev| ev.seq), s.state())
        });
        let settled = st.is_terminal() || st == qflow_core::agent::SessionState::Paused;
        if !found.is_empty() || settled || tokio::time::Instant::now() >= deadline {
            let next = found.last().and_then(|v| v["seq"].as_u64()).unwrap_or(q.after);
            return Ok(Json(json!({ "events": found, "next": next, "last_seq": last_seq, "state": st })));
        }
        if tokio::time::timeout_at(deadline, changes.changed()).await.is_err() {
            continue;
        }
    }
}

async fn pause(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let e = entry(&state, &id)?;
    e.with(|s| s.request_pause())?;
    Ok(Json(e.describe()))
}

async fn resume(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let e = entry(&state, &id)?;
    e.with(|s| s.resume())?;
    e.wake();
    Ok(Json(e.describe()))
}

async fn get_breakpoints(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Vec<Breakpoint>>> {
    let e = entry(&state, &id)?;
    Ok(Json(e.with(|s| s.breakpoints().to_vec())))
}

async fn set_breakpoints(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(bps): Json<Vec<Breakpoint>>,
) -> ApiResult<Json<Vec<Breakpoint>>> {
    let e = entry(&state, &id)?;
    e.with(|s| s.set_breakpoints(bps))?;
    Ok(Json(e.with(|s| s.breakpoints().to_vec())))
}

async fn graph(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let e = entry(&state, &id)?;
    Ok(Json(serde_json::to_value(e.with(|s| s.graph())).expect("graphs serialize")))
}

#[derive(Debug, Default, Deserialize)]
pub struct FileQuery {
    #[serde(default)]
    pub path: String,
}

async fn files(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<FileQuery>,
) -> ApiResult<Response> {
    let e = entry(&state, &id)?;
    let root = e.with(|s| s.workdir().to_path_buf());
    let path = safe_join(&root, &q.path).map_err(ApiError::bad)?;
    let canon_root = root.canonicalize().map_err(|e| ApiError::not_found(e.to_string()))?;
    let canon = path
        .canonicalize()
        .map_err(|_| ApiError::not_found(format!("{:?} does not exist", q.path)))?;
    if !canon.starts_with(&canon_root) {
        return Err(ApiError::bad(format!("path {:?} escapes the working directory", q.path)));
    }
    if canon.is_dir() {
        let mut entries = Vec::new();
        for item in std::fs::read_dir(&canon).map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))? {
            let item = item.map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
            let meta = item.metadata().map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
            let name = item.file_name().to_string_lossy().into_owned();
            let rel = canon.join(&name).strip_prefix(&canon_root).expect("inside root").to_string_lossy().replace('\\', "/");
            entries.push(json!({
                "name": name,
                "path": rel,
                "kind": if meta.is_dir() { "dir" } else { "file" },
                "size": if meta.is_dir() { Value::Null } else { json!(meta.len()) },
            }));
        }
        entries.sort_by(|a, b| a["name"].as_str().cmp(&b["name"].as_str()));
        return Ok(Json(json!({ "path": q.path, "entries": entries })).into_response());
    }
    let bytes = std::fs::read(&canon).map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let ctype = if std::str::from_utf8(&bytes).is_ok() { "text/plain; charset=utf-8" } else { "application/octet-stream" };
    Ok(([(header::CONTENT_TYPE, ctype)], bytes).into_response())
}

async fn export(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let e = entry(&state, &id)?;
    let nb = e
        .with(|s| export_notebook(s.trace().events()))
        .map_err(|err| ApiError::conflict(err.to_string()))?;
    let body = serde_json::to_string_pretty(&nb).expect("notebooks serialize") + "\n";
    Ok((
        [
            (header::CONTENT_TYPE, "application/x-ipynb+json".to_string()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{id}.ipynb\"")),
        ],
        body,
    )
        .into_response())
}
