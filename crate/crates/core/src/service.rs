//! HTTP API over a [`Store`] for the review UI.
//!
//! | method | path | body |
//! |---|---|---|
//! | GET | `/traces` | trace metadata; filters `model`, `environment`, `scope`, `scaffold`, `task_id` |
//! | GET | `/traces/{id}` | trace document |
//! | GET | `/traces/{id}/graph` | validated graph with warnings |
//! | GET | `/traces/{id}/motifs` | motif hits |
//! | GET | `/markers` | marker taxonomy |
//! | GET | `/annotations/{trace_id}/{annotator}` | latest annotation revision |
//! | PUT | `/annotations/{trace_id}/{annotator}` | store a new revision |
//! | POST | `/annotations/{trace_id}/{annotator}/submit` | submit the latest revision |
//!
//! Errors are `{"code", "message"}`. Annotation responses carry the
//! revision number in `ETag`; a PUT with `If-Match` only succeeds against
//! that revision.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;

use crate::markers::{MarkerAnnotation, MarkerError, TAXONOMY};
use crate::store::{Store, StoreError, TraceFilter};

pub const ENV_STORE: &str = "EPITRACE_STORE";
pub const ENV_BIND: &str = "EPITRACE_BIND";
pub const ENV_SERVICE_TOKEN: &str = "EPITRACE_SERVICE_TOKEN";

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    /// Shared bearer token required on every request when set.
    pub token: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", what)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::NotFound(_) => Self::not_found(message),
            StoreError::InvalidId(_) => Self::new(StatusCode::BAD_REQUEST, "invalid_id", message),
            StoreError::Invalid(MarkerError::Incomplete(_)) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "incomplete", message)
            }
            StoreError::Invalid(_) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_error", message)
            }
            StoreError::Conflict { .. } => Self::new(StatusCode::CONFLICT, "conflict", message),
            StoreError::Io { .. } | StoreError::Corrupt { .. } => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
            }
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, StoreError> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

async fn list_traces(
    State(s): State<AppState>,
    Query(filter): Query<TraceFilter>,
) -> ApiResult<Response> {
    let store = s.store.clone();
    let list = blocking(move || store.list_traces(&filter)).await?;
    Ok(Json(list).into_response())
}

async fn get_trace(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let store = s.store.clone();
    let key = id.clone();
    blocking(move || store.get_trace(&key))
        .await?
        .map(|t| Json(t).into_response())
        .ok_or_else(|| ApiError::not_found(format!("trace `{id}`")))
}

async fn get_graph(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let store = s.store.clone();
    let key = id.clone();
    blocking(move || store.get_graph(&key))
        .await?
        .map(|g| Json(g).into_response())
        .ok_or_else(|| ApiError::not_found(format!("graph for `{id}`")))
}

async fn get_motifs(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let store = s.store.clone();
    let key = id.clone();
    blocking(move || store.get_motifs(&key))
        .await?
        .map(|m| Json(m).into_response())
        .ok_or_else(|| ApiError::not_found(format!("motifs for `{id}`")))
}

async fn get_markers() -> Response {
    Json(TAXONOMY.to_vec()).into_response()
}

fn revision_response(status: StatusCode, revision: u64, body: String) -> Response {
    let mut resp = (status, body).into_response();
    let headers = resp.headers_mut();
    headers.insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static("application/json"),
    );
    headers.insert(
        header::ETAG,
        HeaderValue::from_str(&format!("\"{revision}\"")).expect("numeric etag"),
    );
    resp
}

#[derive(Serialize)]
struct Stored {
    trace_id: String,
    annotator_id: String,
    revision: u64,
}

fn stored(trace_id: String, annotator_id: String, revision: u64) -> Response {
    let body = serde_json::to_string(&Stored {
        trace_id,
        annotator_id,
        revision,
    })
    .expect("serializes");
    revision_response(StatusCode::OK, revision, body)
}

async fn get_annotation(
    State(s): State<AppState>,
    Path((trace_id, annotator)): Path<(String, String)>,
) -> ApiResult<Response> {
    let store = s.store.clone();
    let (t, a) = (trace_id.clone(), annotator.clone());
    blocking(move || store.get_annotation(&t, &a))
        .await?
        .map(|r| revision_response(StatusCode::OK, r.revision, r.body))
        .ok_or_else(|| ApiError::not_found(format!("annotation of `{trace_id}` by `{annotator}`")))
}

fn if_match(headers: &HeaderMap) -> ApiResult<Option<u64>> {
    let Some(v) = headers.get(header::IF_MATCH) else {
        return Ok(None);
    };
    v.to_str()
        .ok()
        .map(|s| s.trim().trim_matches('"'))
        .and_then(|s| s.parse().ok())
        .map(Some)
        .ok_or_else(|| {
            ApiError::new(
                StatusCode::BAD_REQUEST,
                "bad_request",
                "If-Match must be a revision number",
            )
        })
}

async fn put_annotation(
    State(s): State<AppState>,
    Path((trace_id, annotator)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let annotation: MarkerAnnotation = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))?;
    if annotation.trace_id != trace_id || annotation.annotator_id != annotator {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "bad_request",
            "trace_id and annotator_id in the body must match the path",
        ));
    }
    let expected = if_match(&headers)?;
    let store = s.store.clone();
    let revision = blocking(move || {
        let trace = store
            .get_trace(&annotation.trace_id)?
            .ok_or_else(|| StoreError::NotFound(format!("trace `{}`", annotation.trace_id)))?;
        store.store_annotation(&annotation, &trace, expected)
    })
    .await?;
    Ok(stored(trace_id, annotator, revision))
}

async fn submit_annotation(
    State(s): State<AppState>,
    Path((trace_id, annotator)): Path<(String, String)>,
) -> ApiResult<Response> {
    let store = s.store.clone();
    let (t, a) = (trace_id.clone(), annotator.clone());
    let revision = blocking(move || {
        let trace = store
            .get_trace(&t)?
            .ok_or_else(|| StoreError::NotFound(format!("trace `{t}`")))?;
        store.submit_annotation(&trace, &a)
    })
    .await?;
    Ok(stored(trace_id, annotator, revision))
}

async fn require_token(State(s): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &s.token {
        let presented = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong token")
                .into_response();
        }
    }
    next.run(req).await
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/traces", get(list_traces))
        .route("/traces/{id}", get(get_trace))
        .route("/traces/{id}/graph", get(get_graph))
        .route("/traces/{id}/motifs", get(get_motifs))
        .route("/markers", get(get_markers))
        .route(
            "/annotations/{trace_id}/{annotator}",
            get(get_annotation).put(put_annotation),
        )
        .route(
            "/annotations/{trace_id}/{annotator}/submit",
            post(submit_annotation),
        )
        .fallback(fallback)
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

/// Serves until the process receives Ctrl-C.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
