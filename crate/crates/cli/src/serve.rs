//! HTTP mode.
//!
//! `GET /v1/health` answers `ok`. `POST /v1/analyze` takes
//! `{"source": .., "ref"?: .., "paper_parity"?: .., "eval_truth"?: ..}` and
//! returns the diagram and its traceability inline. Each request is analyzed
//! on its own blocking thread with its own state.

use std::path::PathBuf;

use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::request::{AnalysisRequest, Source};
use crate::run;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeRequest {
    pub source: String,
    #[serde(rename = "ref")]
    pub git_ref: Option<String>,
    #[serde(default)]
    pub paper_parity: bool,
    pub eval_truth: Option<PathBuf>,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({"error": message.into()}))).into_response()
}

async fn analyze(body: Result<Json<ServeRequest>, JsonRejection>) -> Response {
    let Json(body) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let mut request = AnalysisRequest::new(Source::guess(&body.source));
    request.git_ref = body.git_ref;
    request.paper_parity = body.paper_parity;
    request.eval_truth = body.eval_truth;
    if let Err(e) = request.validate() {
        return error(StatusCode::BAD_REQUEST, e.to_string());
    }
    let result = tokio::task::spawn_blocking(move || run::execute(&request)).await;
    let outcome = match result {
        Ok(Ok(o)) => o,
        Ok(Err(e)) => return error(StatusCode::UNPROCESSABLE_ENTITY, format!("{e:#}")),
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    };
    let parse = |bytes: Vec<u8>| serde_json::from_slice::<Value>(&bytes).expect("own output is valid JSON");
    let a = &outcome.analysis;
    Json(json!({
        "app": outcome.app,
        "commit": outcome.commit,
        "extraction_seconds": a.elapsed.as_secs_f64(),
        "dfd": parse(a.json()),
        "traceability": parse(a.trace_json()),
        "report": a.report,
        "metrics": outcome.metrics(),
    }))
    .into_response()
}

pub fn router() -> Router {
    Router::new()
        .route("/v1/health", get(|| async { "ok" }))
        .route("/v1/analyze", post(analyze))
}

pub async fn serve(addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router()).await?;
    Ok(())
}
