//! HTTP service for live dialogue sessions with a trained diagnosis agent.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/sessions` | `{self_report}` | `{id, agent_utterance, status, diagnosis?}` |
//! | POST | `/sessions/{id}/messages` | `{text}` | `{agent_utterance, status, diagnosis?}` |
//! | GET | `/sessions/{id}` | | session record |
//!
//! Errors carry `{error, message}`: 400 for empty or malformed input, 404 for
//! unknown sessions, 409 for messages to closed sessions, 422 for messages
//! the language layer cannot interpret.

mod store;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use krds_core::api::{
    CreateSessionRequest, CreateSessionResponse, ErrorBody, MessageRequest, MessageResponse,
};
use krds_core::session::{DiagnosisAgent, SessionRecord};
use krds_core::KrdsError;
use tokio::net::TcpListener;

pub use store::{SessionHandle, SessionStore, StoreError};

pub struct AppState {
    pub agent: DiagnosisAgent,
    pub store: SessionStore,
}

pub type SharedState = Arc<AppState>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                error: error.to_string(),
                message: message.into(),
            },
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("no session {id:?}"),
        )
    }
}

impl From<KrdsError> for ApiError {
    fn from(e: KrdsError) -> Self {
        match e {
            KrdsError::Validation { .. } => {
                Self::new(StatusCode::BAD_REQUEST, "invalid_request", e.to_string())
            }
            KrdsError::SessionClosed => {
                Self::new(StatusCode::CONFLICT, "session_closed", e.to_string())
            }
            KrdsError::Unparseable(_) => Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "unparseable",
                e.to_string(),
            ),
            other => Self::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                "internal",
                other.to_string(),
            ),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        tracing::error!("session store: {e}");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

async fn create_session(
    State(state): State<SharedState>,
    body: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<CreateSessionResponse>), ApiError> {
    let Json(req) = body?;
    let id = uuid::Uuid::new_v4().to_string();
    let (record, reply) = state.agent.start(id.clone(), &req.self_report, now_ms())?;
    state.store.insert(record)?;
    tracing::info!(session = %id, status = ?reply.status, "session created");
    Ok((
        StatusCode::CREATED,
        Json(CreateSessionResponse {
            id,
            agent_utterance: reply.agent_utterance,
            status: reply.status,
            diagnosis: reply.diagnosis,
        }),
    ))
}

async fn post_message(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    body: Result<Json<MessageRequest>, JsonRejection>,
) -> Result<Json<MessageResponse>, ApiError> {
    let handle = state
        .store
        .get(&id)
        .ok_or_else(|| ApiError::not_found(&id))?;
    let Json(req) = body?;
    let mut record = handle.lock().expect("session lock poisoned");
    let mut next = record.clone();
    let reply = state.agent.reply(&mut next, &req.text, now_ms())?;
    state.store.persist(&next)?;
    *record = next;
    tracing::info!(session = %id, status = ?reply.status, "message handled");
    Ok(Json(reply))
}

async fn get_session(
    State(state): State<SharedState>,
    Path(id): Path<String>,
) -> Result<Json<SessionRecord>, ApiError> {
    let handle = state
        .store
        .get(&id)
        .ok_or_else(|| ApiError::not_found(&id))?;
    let record = handle.lock().expect("session lock poisoned").clone();
    Ok(Json(record))
}

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, state: SharedState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// Binds `addr` and returns the bound address with the serving future.
pub async fn bind(
    addr: SocketAddr,
    state: SharedState,
) -> std::io::Result<(
    SocketAddr,
    impl std::future::Future<Output = std::io::Result<()>>,
)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    Ok((local, serve(listener, state)))
}
