//! HTTP session service for interactive sequential diagnosis.
//!
//! Endpoints:
//!
//! - `POST /sessions` creates a session and runs its first iteration
//! - `GET /sessions/{id}` returns the current state
//! - `POST /sessions/{id}/answer` adds an answer and runs the next iteration
//! - `GET /sessions/{id}/stats` returns the session report
//! - `DELETE /sessions/{id}` drops the session
//!
//! Requests on one session are serialized; engine work runs on the blocking
//! pool so other sessions proceed meanwhile.

pub mod api;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;
use uuid::Uuid;

use seqdiag_core::dpi::Dpi;
use seqdiag_core::formula::Formula;
use seqdiag_core::session::{Session, SessionConfig, SessionError};

use api::{Answer, CreateSession, ErrorBody, SessionState, SessionStats};
use store::{write_snapshot, Store, StoreConfig};

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(id: &str) -> ApiError {
        ApiError::new(StatusCode::NOT_FOUND, format!("no session '{id}'"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> ApiError {
        let status = match e {
            SessionError::FaultFreeDpi => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::InvalidLd(_) => StatusCode::BAD_REQUEST,
            SessionError::NotAwaitingAnswer => StatusCode::CONFLICT,
        };
        ApiError::new(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub type AppState = Arc<Store>;

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request: {e}")))
}

fn config_from(req: CreateSession) -> ApiResult<SessionConfig> {
    let dpi = Dpi::from_document(&req.dpi).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let mut config = SessionConfig::new(dpi, req.ld, req.heuristic, req.engine);
    if let Some(script) = req.script {
        let sentences = script
            .iter()
            .map(|s| Formula::parse(s).map_err(|e| ApiError::bad_request(format!("script sentence '{s}': {e}"))))
            .collect::<ApiResult<Vec<_>>>()?;
        config.script = Some(sentences);
    }
    Ok(config)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("engine task failed: {e}")))
}

fn parse_id(id: &str) -> ApiResult<Uuid> {
    Uuid::parse_str(id).map_err(|_| ApiError::not_found(id))
}

fn persist(store: &Store, id: &Uuid, session: &Session) {
    if let Some(path) = store.snapshot_path(id) {
        // snapshots are best effort; the in-memory session stays authoritative
        let _ = write_snapshot(&path, id, session);
    }
}

async fn create_session(State(store): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<SessionState>)> {
    let req: CreateSession = parse_body(&body)?;
    let config = config_from(req)?;
    let session = blocking(move || Session::start(config)).await??;
    let id = store.insert(session.clone());
    let state = SessionState::of(&id.to_string(), &session);
    let store2 = store.clone();
    blocking(move || persist(&store2, &id, &session)).await?;
    Ok((StatusCode::CREATED, Json(state)))
}

async fn get_session(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionState>> {
    let uuid = parse_id(&id)?;
    let entry = store.get(&uuid).ok_or_else(|| ApiError::not_found(&id))?;
    let session = entry.session.lock().await;
    Ok(Json(SessionState::of(&id, &session)))
}

async fn answer(State(store): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<SessionState>> {
    let uuid = parse_id(&id)?;
    let entry = store.get(&uuid).ok_or_else(|| ApiError::not_found(&id))?;
    let req: Answer = parse_body(&body)?;
    let mut guard = entry.session.clone().lock_owned().await;
    if !guard.is_awaiting_answer() {
        return Err(SessionError::NotAwaitingAnswer.into());
    }
    let store2 = store.clone();
    let state = blocking(move || {
        guard.answer(req.outcome)?;
        persist(&store2, &uuid, &guard);
        Ok::<_, SessionError>(SessionState::of(&id, &guard))
    })
    .await??;
    Ok(Json(state))
}

async fn stats(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionStats>> {
    let uuid = parse_id(&id)?;
    let entry = store.get(&uuid).ok_or_else(|| ApiError::not_found(&id))?;
    let session = entry.session.lock().await;
    Ok(Json(SessionStats::of(&id, &session)))
}

async fn delete_session(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let uuid = parse_id(&id)?;
    if store.remove(&uuid) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::not_found(&id))
    }
}

/// The session API on top of `store`.
pub fn router(store: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/answer", post(answer))
        .route("/sessions/{id}/stats", get(stats))
        .with_state(store)
}

/// Periodically drops idle sessions.
pub fn spawn_sweeper(store: AppState, every: Duration) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(every);
        loop {
            tick.tick().await;
            store.sweep(Instant::now());
        }
    })
}

#[derive(Clone, Debug, Default)]
pub struct ServeOptions {
    pub port: u16,
    /// Directory served for all paths outside the API.
    pub static_dir: Option<PathBuf>,
    pub store: StoreConfig,
}

pub async fn serve(options: ServeOptions) -> std::io::Result<()> {
    let store = Arc::new(Store::new(options.store.clone()));
    let sweep_every = (options.store.idle_timeout / 4).max(Duration::from_secs(1));
    spawn_sweeper(store.clone(), sweep_every);
    let mut app = router(store);
    if let Some(dir) = options.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    let listener = TcpListener::bind(SocketAddr::from(([0, 0, 0, 0], options.port))).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await
}
