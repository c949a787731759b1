//! HTTP review API over a [`ReviewStore`], plus static UI assets.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use telekit_core::forge::items::{BenchItem, ItemRecord};
use telekit_core::pipeline::{DecisionRequest, ReviewError, ReviewStore};
use tower_http::services::ServeDir;

pub type Clock = Arc<dyn Fn() -> String + Send + Sync>;

#[derive(Clone)]
pub struct ApiConfig {
    /// Shared bearer token; `None` disables auth.
    pub token: Option<String>,
    pub static_dir: Option<PathBuf>,
    /// Timestamp source for journaled decisions.
    pub clock: Clock,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self {
            token: None,
            static_dir: None,
            clock: Arc::new(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)),
        }
    }
}

#[derive(Clone)]
struct AppState {
    store: Arc<ReviewStore>,
    clock: Clock,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        let (status, code) = match &e {
            ReviewError::UnknownItem(_) => (StatusCode::NOT_FOUND, "unknown-item"),
            ReviewError::NotReviewable(_) => (StatusCode::CONFLICT, "not-reviewable"),
            ReviewError::AlreadyDecided(_) => (StatusCode::CONFLICT, "already-decided"),
            ReviewError::InvalidDecision(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid-decision"),
            ReviewError::InvalidEdit(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid-edit"),
            ReviewError::Journal { .. } | ReviewError::Load(_) => {
                log::error!("review store failure: {e}");
                (StatusCode::INTERNAL_SERVER_ERROR, "journal-error")
            }
        };
        Self::new(status, code, e.to_string())
    }
}

#[derive(Debug, Deserialize)]
struct QueueQuery {
    kind: Option<String>,
    limit: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    kind: Option<String>,
    #[serde(default)]
    include_pending: bool,
}

/// A queued item with any banned tokens flagged for the reviewer.
#[derive(Debug, Serialize, Deserialize)]
pub struct QueueEntry {
    #[serde(flatten)]
    pub record: ItemRecord,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub banned_tokens: Vec<String>,
}

fn non_empty(s: Option<String>) -> Option<String> {
    s.filter(|k| !k.is_empty())
}

fn bad_query(e: QueryRejection) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, "bad-query", e.body_text())
}

async fn queue(
    State(s): State<AppState>,
    q: Result<Query<QueueQuery>, QueryRejection>,
) -> Result<Json<Vec<QueueEntry>>, ApiError> {
    let Query(q) = q.map_err(bad_query)?;
    let kind = non_empty(q.kind);
    let entries = s
        .store
        .queue(kind.as_deref(), q.limit)
        .into_iter()
        .map(|record| {
            let banned_tokens = match &record.item {
                BenchItem::Mcq(m) => m.banned_tokens(),
                _ => Vec::new(),
            };
            QueueEntry { record, banned_tokens }
        })
        .collect();
    Ok(Json(entries))
}

async fn decide(
    State(s): State<AppState>,
    body: Result<Json<DecisionRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed-decision", e.body_text()))?;
    let timestamp = (s.clock)();
    // the journal append fsyncs; keep it off the async workers
    let decision = tokio::task::spawn_blocking(move || s.store.decide(req, timestamp))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok((StatusCode::CREATED, Json(decision)).into_response())
}

async fn export(
    State(s): State<AppState>,
    q: Result<Query<ExportQuery>, QueryRejection>,
) -> Result<Json<Vec<ItemRecord>>, ApiError> {
    let Query(q) = q.map_err(bad_query)?;
    let kind = non_empty(q.kind);
    Ok(Json(s.store.exportable(kind.as_deref(), q.include_pending)))
}

async fn stats(State(s): State<AppState>) -> Json<telekit_core::pipeline::ReviewStats> {
    Json(s.store.stats())
}

async fn api_not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not-found", "no such endpoint")
}

fn token_matches(given: &str, expected: &str) -> bool {
    // length leaks, contents do not
    given.len() == expected.len()
        && given
            .bytes()
            .zip(expected.bytes())
            .fold(0u8, |acc, (a, b)| acc | (a ^ b))
            == 0
}

async fn require_token(State(token): State<Arc<String>>, req: Request, next: Next) -> Response {
    let given = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    match given {
        Some(t) if token_matches(t.trim(), &token) => next.run(req).await,
        _ => {
            let mut resp = ApiError::new(
                StatusCode::UNAUTHORIZED,
                "unauthorized",
                "missing or invalid bearer token",
            )
            .into_response();
            resp.headers_mut()
                .insert(header::WWW_AUTHENTICATE, header::HeaderValue::from_static("Bearer"));
            resp
        }
    }
}

/// Routes under `/api`, guarded by the bearer token when one is set; every
/// other path is served from the static directory when one is configured.
pub fn router(store: Arc<ReviewStore>, cfg: ApiConfig) -> Router {
    let state = AppState {
        store,
        clock: cfg.clock,
    };
    let mut api = Router::new()
        .route("/queue", get(queue))
        .route("/decisions", post(decide))
        .route("/export", get(export))
        .route("/stats", get(stats))
        .fallback(api_not_found)
        .with_state(state);
    if let Some(token) = cfg.token.filter(|t| !t.is_empty()) {
        api = api.layer(middleware::from_fn_with_state(Arc::new(token), require_token));
    }
    let app = Router::new().nest("/api", api);
    match cfg.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => app,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_comparison() {
        assert!(token_matches("s3cret", "s3cret"));
        assert!(!token_matches("s3cret", "s3creT"));
        assert!(!token_matches("s3cre", "s3cret"));
        assert!(!token_matches("", "s3cret"));
    }
}
