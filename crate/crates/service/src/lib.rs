//! Read-only JSON API over trained difficulty models, versioned under `/v1`.
//!
//! * `GET  /v1/languages` lists loaded L1 models.
//! * `POST /v1/annotate` tokenizes text and attaches a [`WordReport`] to
//!   every known word.
//! * `GET  /v1/word/{l1}/{lemma}?pos=` returns one report plus the POS
//!   alternatives.
//! * `GET  /v1/openapi.json` returns the OpenAPI description.

mod inflections;
mod openapi;
mod state;
mod tokenize;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lexdiff_core::corpus::L1;
use lexdiff_core::pipeline::PipelineError;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use inflections::{Candidate, InflectionTable};
pub use openapi::openapi_document;
pub use state::{bin_of, AppState, FeatureContribution, LanguageModel, Resolution, WordReport};
pub use tokenize::{tokenize, Span, TokenKind};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{path}:{line}: {message}")]
    Inflections { path: PathBuf, line: u64, message: String },
    #[error("{0}")]
    Model(String),
    #[error("invalid CORS origin {0:?}")]
    CorsOrigin(String),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<lexdiff_core::corpus::CorpusError> for ServiceError {
    fn from(e: lexdiff_core::corpus::CorpusError) -> Self {
        ServiceError::Pipeline(e.into())
    }
}

impl ServiceError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ServiceError::Pipeline(e) => e.exit_code(),
            ServiceError::CorsOrigin(_) | ServiceError::Bind { .. } => 2,
            _ => 3,
        }
    }
}

/// JSON error body: `{"error": {"code": ..., "message": ...}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

fn loaded<'a>(state: &'a AppState, l1: &str) -> Result<&'a LanguageModel, ApiError> {
    let parsed = L1::from_str(l1).map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "unknown_l1", format!("unknown L1 {l1:?}")))?;
    state
        .languages
        .get(&parsed)
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "unknown_l1", format!("no model loaded for {parsed}")))
}

async fn languages(State(state): State<Arc<AppState>>) -> Result<Json<Vec<L1>>, ApiError> {
    if !state.load_errors.is_empty() {
        let msg = state
            .load_errors
            .iter()
            .map(|(l, e)| format!("{l}: {e}"))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "model_load_failed", msg));
    }
    Ok(Json(state.languages.keys().copied().collect()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotateRequest {
    pub text: String,
    pub l1: String,
    #[serde(default)]
    pub include_extension: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnnotatedToken {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub kind: TokenKind,
    pub known: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<Arc<WordReport>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnnotateResponse {
    pub l1: L1,
    pub quintiles: [f64; 4],
    pub tokens: Vec<AnnotatedToken>,
}

async fn annotate(
    State(state): State<Arc<AppState>>,
    body: Result<Json<AnnotateRequest>, JsonRejection>,
) -> Result<Json<AnnotateResponse>, ApiError> {
    let Json(req) = body.map_err(|e| {
        let status = e.status();
        let code = if status == StatusCode::PAYLOAD_TOO_LARGE { "payload_too_large" } else { "bad_request" };
        ApiError::new(status, code, e.body_text())
    })?;
    let lm = loaded(&state, &req.l1)?;
    if req.text.len() > state.max_text_bytes {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "payload_too_large",
            format!("text is {} bytes; the limit is {}", req.text.len(), state.max_text_bytes),
        ));
    }
    if req.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_text", "text is empty"));
    }
    let tokens = tokenize(&req.text)
        .into_iter()
        .map(|s| {
            let report = (s.kind == TokenKind::Word)
                .then(|| state.resolve_token(lm, s.text, req.include_extension))
                .flatten();
            AnnotatedToken {
                text: s.text.to_string(),
                start: s.start,
                end: s.end,
                kind: s.kind,
                known: report.is_some(),
                report,
            }
        })
        .collect();
    Ok(Json(AnnotateResponse {
        l1: lm.l1,
        quintiles: lm.quintiles,
        tokens,
    }))
}

#[derive(Debug, Deserialize)]
pub struct WordQuery {
    pub pos: Option<String>,
    #[serde(default)]
    pub include_extension: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WordResponse {
    #[serde(flatten)]
    pub report: WordReport,
    pub alternatives: Vec<String>,
}

async fn word(
    State(state): State<Arc<AppState>>,
    Path((l1, lemma)): Path<(String, String)>,
    Query(q): Query<WordQuery>,
) -> Result<Json<WordResponse>, ApiError> {
    let lm = loaded(&state, &l1)?;
    match state.resolve(lm, &lemma, q.pos.as_deref(), q.include_extension) {
        Resolution::Found(r, alternatives) => Ok(Json(WordResponse {
            report: (*r).clone(),
            alternatives,
        })),
        Resolution::UnknownLemma => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_word",
            format!("no {} item for {lemma:?}", lm.l1),
        )),
        Resolution::UnknownPos(alts) => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_pos",
            format!("{lemma:?} has no {:?} reading; available: {}", q.pos.unwrap_or_default(), alts.join(", ")),
        )),
    }
}

async fn openapi() -> Json<serde_json::Value> {
    Json(openapi_document())
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

fn cors(origins: &[String]) -> Result<CorsLayer, ServiceError> {
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([axum::http::header::CONTENT_TYPE]);
    if origins.is_empty() {
        return Ok(layer.allow_origin(Any));
    }
    let list = origins
        .iter()
        .map(|o| HeaderValue::from_str(o).map_err(|_| ServiceError::CorsOrigin(o.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(layer.allow_origin(AllowOrigin::list(list)))
}

/// Router over a loaded state.
pub fn router(state: AppState) -> Result<Router, ServiceError> {
    let cors = cors(&state.pipeline.config.service.cors_origins)?;
    // Room for JSON escaping of a maximal text.
    let body_limit = state.max_text_bytes.saturating_mul(6).saturating_add(4096);
    Ok(Router::new()
        .route("/v1/languages", get(languages))
        .route("/v1/annotate", post(annotate))
        .route("/v1/word/{l1}/{lemma}", get(word))
        .route("/v1/openapi.json", get(openapi))
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(body_limit))
        .layer(cors)
        .with_state(Arc::new(state)))
}

/// Bind and serve until Ctrl-C.
pub async fn serve(state: AppState, bind: &str) -> Result<(), ServiceError> {
    let addr: SocketAddr = bind.parse().map_err(|e: std::net::AddrParseError| ServiceError::Bind {
        addr: bind.to_string(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidInput, e),
    })?;
    let app = router(state)?;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind {
        addr: bind.to_string(),
        source,
    })?;
    let local = listener.local_addr().unwrap_or(addr);
    log::info!("listening on http://{local}");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| ServiceError::Bind {
            addr: bind.to_string(),
            source,
        })
}
