//! HTTP scoring service.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/api/v2/score?api-version=2` | bearer-authenticated scoring |
//! | GET | `/healthz` | liveness plus model kind and tree count |
//! | GET | `/api/v2/model` | model metadata |
//!
//! Errors are `{"error": "<message>"}` with status 401 (bad or missing
//! token), 415 (non-JSON content type) or 400 (anything else wrong with the
//! request).

mod batch;
mod score;

use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{RawQuery, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use evprice_core::learners::{load_model, FittedModel, ModelError, FORMAT_VERSION};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::net::TcpListener;
use tower_http::cors::CorsLayer;

pub use batch::{batch_score, BatchScore, ERROR_COLUMN};
pub use score::{date_created, render_label, score_request, BadRequest, DATE_CREATED};

pub const SCORE_PATH: &str = "/api/v2/score";
pub const API_VERSION: &str = "2";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot load model {path}: {source}")]
    Model { path: String, source: ModelError },
    #[error("bearer token is empty")]
    EmptyToken,
}

/// Reads and validates a model file.
pub fn load_model_file(path: &Path) -> Result<FittedModel, ServiceError> {
    let text = std::fs::read_to_string(path).map_err(|source| ServiceError::Read {
        path: path.display().to_string(),
        source,
    })?;
    load_model(&text).map_err(|source| ServiceError::Model {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a bearer token, ignoring surrounding whitespace.
pub fn load_token_file(path: &Path) -> Result<String, ServiceError> {
    let text = std::fs::read_to_string(path).map_err(|source| ServiceError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let token = text.trim();
    if token.is_empty() {
        return Err(ServiceError::EmptyToken);
    }
    Ok(token.to_string())
}

/// Shared, read-only request state.
#[derive(Clone)]
pub struct AppState {
    model: Arc<FittedModel>,
    token: Arc<str>,
}

impl AppState {
    pub fn new(model: FittedModel, token: &str) -> Result<Self, ServiceError> {
        if token.is_empty() {
            return Err(ServiceError::EmptyToken);
        }
        Ok(AppState {
            model: Arc::new(model),
            token: token.into(),
        })
    }

    pub fn model(&self) -> &FittedModel {
        &self.model
    }

    fn authorized(&self, headers: &HeaderMap) -> bool {
        let Some(value) = headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()) else {
            return false;
        };
        let Some(presented) = value.strip_prefix("Bearer ") else {
            return false;
        };
        let (a, b) = (presented.trim().as_bytes(), self.token.as_bytes());
        a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn check_api_version(query: Option<&str>) -> Result<(), String> {
    let pairs: Vec<(String, String)> =
        serde_urlencoded::from_str(query.unwrap_or("")).map_err(|e| format!("malformed query string: {e}"))?;
    match pairs.iter().find(|(k, _)| k == "api-version") {
        None => Err(format!("query parameter api-version={API_VERSION} is required")),
        Some((_, v)) if v == API_VERSION => Ok(()),
        Some((_, v)) => Err(format!("unsupported api-version `{v}`; supported: {API_VERSION}")),
    }
}

fn is_json(headers: &HeaderMap) -> bool {
    headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.split(';').next())
        .is_some_and(|m| m.trim().eq_ignore_ascii_case("application/json"))
}

async fn score(State(app): State<AppState>, RawQuery(query): RawQuery, headers: HeaderMap, body: Bytes) -> Response {
    if !app.authorized(&headers) {
        let mut r = error(StatusCode::UNAUTHORIZED, "unauthorized");
        r.headers_mut()
            .insert(header::WWW_AUTHENTICATE, header::HeaderValue::from_static("Bearer"));
        return r;
    }
    if let Err(msg) = check_api_version(query.as_deref()) {
        return error(StatusCode::BAD_REQUEST, msg);
    }
    if !is_json(&headers) {
        return error(
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            "Content-Type must be application/json",
        );
    }
    match score_request(&app.model, &body) {
        Ok(v) => Json(v).into_response(),
        Err(e) => error(StatusCode::BAD_REQUEST, e.0),
    }
}

async fn healthz(State(app): State<AppState>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "model_kind": app.model.model_kind(),
        "trees": app.model.tree_count(),
    }))
}

async fn model_info(State(app): State<AppState>) -> Json<Value> {
    let m = &app.model;
    Json(json!({
        "format_version": FORMAT_VERSION,
        "model_kind": m.model_kind(),
        "trees": m.tree_count(),
        "target": m.encoding().target,
        "required_fields": m.encoding().columns.iter().map(|c| c.name.as_str()).collect::<Vec<_>>(),
        "features": m.encoding().feature_names(),
    }))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route(SCORE_PATH, post(score))
        .route("/healthz", get(healthz))
        .route("/api/v2/model", get(model_info))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
