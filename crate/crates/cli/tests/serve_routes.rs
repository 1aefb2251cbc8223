use std::path::PathBuf;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use dfdtrace::serve::router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

async fn post(body: &str) -> (StatusCode, Value) {
    let req = Request::post("/v1/analyze")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = router().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn health() {
    let resp = router().oneshot(Request::get("/v1/health").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
}

#[tokio::test]
async fn analyzes_a_fixture() {
    let (status, body) = post(&json!({"source": fixture("golden")}).to_string()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["dfd"]["nodes"].as_array().unwrap().len(), 6);
    assert_eq!(body["traceability"]["notification_service"]["line"], 3);
    assert!(body["metrics"].is_null());
}

#[tokio::test]
async fn scores_against_truth() {
    let (status, body) = post(
        &json!({"source": fixture("piggymetrics"), "eval_truth": fixture("piggymetrics.truth.json")}).to_string(),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["metrics"]["counts"]["services"]["tp"], 14);
}

#[tokio::test]
async fn malformed_bodies_are_rejected() {
    for body in ["{", "[]", r#"{"path": "x"}"#, r#"{"source": ""}"#, r#"{"source": 3}"#] {
        let (status, reply) = post(body).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert!(reply["error"].is_string(), "{body}");
    }
}

#[tokio::test]
async fn unreachable_sources_report_and_the_service_stays_up() {
    let (status, body) = post(r#"{"source": "/no/such/app"}"#).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].as_str().unwrap().contains("/no/such/app"));
    let (status, _) = post(&json!({"source": fixture("golden")}).to_string()).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_requests_are_independent() {
    let a = json!({"source": fixture("golden")}).to_string();
    let b = json!({"source": fixture("piggymetrics")}).to_string();
    let ((sa, ra), (sb, rb)) = tokio::join!(post(&a), post(&b));
    assert_eq!((sa, sb), (StatusCode::OK, StatusCode::OK));
    assert_eq!(ra["app"], "golden");
    assert_eq!(rb["app"], "piggymetrics");
    assert_eq!(ra["dfd"]["flows"].as_array().unwrap().len(), 6);
    assert!(rb["dfd"]["nodes"].as_array().unwrap().len() > 6);
}
