//! Read-only HTTP service over one loaded snapshot.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::SystemTime;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use serde::Deserialize;

use crate::api::{self, SceneParams};
use crate::query::QueryError;
use crate::scene::DEFAULT_BIRDS_EYE_BUCKETS;
use crate::snapshot::{self, Snapshot, SnapshotError};

const JSON: &str = "application/json";
const JSON_LINES: &str = "application/x-ndjson";
const INDEX_HTML: &str = include_str!("../assets/index.html");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Fingerprint {
    len: u64,
    modified: Option<SystemTime>,
}

fn fingerprint(path: &Path) -> Option<Fingerprint> {
    let meta = std::fs::metadata(path).ok()?;
    Some(Fingerprint {
        len: meta.len(),
        modified: meta.modified().ok(),
    })
}

/// The snapshot being served and, when it came from a file, that file's identity at load time.
pub struct AppState {
    snapshot: Snapshot,
    source: Option<(PathBuf, Option<Fingerprint>)>,
}

impl AppState {
    pub fn new(snapshot: Snapshot) -> Self {
        AppState {
            snapshot,
            source: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, SnapshotError> {
        let fp = fingerprint(path);
        let snapshot = snapshot::read_snapshot(path)?;
        Ok(AppState {
            snapshot,
            source: Some((path.to_owned(), fp)),
        })
    }

    fn check_fresh(&self) -> Result<&Snapshot, ApiError> {
        if let Some((path, fp)) = &self.source {
            if fingerprint(path) != *fp {
                return Err(ApiError::Gone);
            }
        }
        Ok(&self.snapshot)
    }
}

#[derive(Debug)]
enum ApiError {
    NotFound(String),
    BadRequest(String),
    Gone,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, msg) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Gone => (
                StatusCode::GONE,
                "snapshot file changed since it was loaded; restart the service".to_owned(),
            ),
        };
        (status, msg + "\n").into_response()
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::UnknownMessage(_) => ApiError::NotFound(e.to_string()),
            other => ApiError::BadRequest(other.to_string()),
        }
    }
}

type ApiResult = Result<Response, ApiError>;

fn body(content_type: &'static str, text: String) -> Response {
    ([(header::CONTENT_TYPE, content_type)], text).into_response()
}

type Shared = State<Arc<AppState>>;

async fn session(State(s): Shared) -> ApiResult {
    Ok(body(JSON, api::session_body(s.check_fresh()?)))
}

async fn flat_profile(State(s): Shared) -> ApiResult {
    Ok(body(JSON, api::flat_profile_body(s.check_fresh()?)))
}

async fn global_stats(State(s): Shared) -> ApiResult {
    Ok(body(JSON, api::global_stats_body(s.check_fresh()?)))
}

async fn scene(State(s): Shared, Query(params): Query<SceneParams>) -> ApiResult {
    let snap = s.check_fresh()?;
    let text = api::scene_body(snap, &params).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    Ok(body(JSON_LINES, text))
}

#[derive(Deserialize)]
struct CpuParams {
    bucket_ms: Option<i64>,
}

async fn cpu(State(s): Shared, Query(p): Query<CpuParams>) -> ApiResult {
    let snap = s.check_fresh()?;
    let bucket = p.bucket_ms.unwrap_or(snap.manifest.slice_ms);
    Ok(body(JSON, api::cpu_body(snap, bucket)?))
}

async fn message(State(s): Shared, UrlPath(id): UrlPath<String>) -> ApiResult {
    Ok(body(JSON, api::message_body(s.check_fresh()?, &id)?))
}

#[derive(Deserialize)]
struct BirdsEyeParams {
    buckets: Option<u32>,
}

async fn birds_eye(State(s): Shared, Query(p): Query<BirdsEyeParams>) -> ApiResult {
    let snap = s.check_fresh()?;
    let text = api::birds_eye_body(snap, p.buckets.unwrap_or(DEFAULT_BIRDS_EYE_BUCKETS))
        .map_err(|e| ApiError::BadRequest(e.to_string()))?;
    Ok(body(JSON_LINES, text))
}

async fn index() -> Html<&'static str> {
    Html(INDEX_HTML)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/api/session", get(session))
        .route("/api/flat-profile", get(flat_profile))
        .route("/api/global-stats", get(global_stats))
        .route("/api/scene", get(scene))
        .route("/api/cpu", get(cpu))
        .route("/api/message/{id}", get(message))
        .route("/api/birds-eye", get(birds_eye))
        .with_state(state)
}

/// Serves until the process is interrupted.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state))).await
}
