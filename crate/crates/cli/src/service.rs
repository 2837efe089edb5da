//! JSON-over-HTTP service under `/v1`.

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use spanshap_pipeline::clarify::ClarificationOutcome;
use spanshap_pipeline::store::SCHEMA_VERSION;
use spanshap_pipeline::{AttributionRequest, Pipeline, PipelineConfig, RunOutcome};

use crate::error::ServiceError;

#[derive(Clone)]
pub struct AppState {
    pub pipeline: Pipeline,
    /// Used when a request carries no config.
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeBody {
    pub input: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<PipelineConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClarifyBody {
    pub run_id: String,
    pub revised_input: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClarifyResponse {
    pub outcome: ClarificationOutcome,
    pub after: RunOutcome,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = if self.is_not_found() {
            StatusCode::NOT_FOUND
        } else {
            self.code.status()
        };
        (status, Json(self)).into_response()
    }
}

type Reply<T> = Result<Json<T>, ServiceError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::bad_request(format!("request body: {e}")))
}

async fn blocking<T, F>(f: F) -> Reply<T>
where
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::internal(format!("worker failed: {e}")))?
        .map(Json)
}

async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "status": "ok",
        "schema_version": SCHEMA_VERSION,
        "backend": state.pipeline.backend().id(),
    }))
}

async fn attribute(State(state): State<AppState>, body: Bytes) -> Reply<RunOutcome> {
    let body: AttributeBody = parse_body(&body)?;
    let request = AttributionRequest {
        input: body.input,
        context: body.context,
        config: body.config.unwrap_or(state.config),
    };
    blocking(move || Ok(state.pipeline.run(&request)?)).await
}

async fn get_run(State(state): State<AppState>, Path(id): Path<String>) -> Reply<spanshap_pipeline::RunArchive> {
    blocking(move || Ok(state.pipeline.store().export(&id)?)).await
}

async fn clarify(State(state): State<AppState>, body: Bytes) -> Reply<ClarifyResponse> {
    let body: ClarifyBody = parse_body(&body)?;
    blocking(move || {
        let (outcome, after) = state.pipeline.revise(&body.run_id, &body.revised_input)?;
        Ok(ClarifyResponse { outcome, after })
    })
    .await
}

async fn not_found() -> Response {
    (StatusCode::NOT_FOUND, Json(ServiceError::bad_request("no such endpoint"))).into_response()
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/attribute", post(attribute))
        .route("/v1/runs/{id}", get(get_run))
        .route("/v1/clarify", post(clarify))
        .fallback(not_found)
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(state: AppState, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
