use std::path::Path;
use std::process::Command;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use compound_bo::campaign::{CampaignConfig, Strategy};
use compound_bo::oracle::{Oracle, OracleSpec};
use compound_bo_cli::server::{router, AppState};
use compound_bo_cli::Store;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(dir: &Path, token: Option<&str>) -> Router {
    router(AppState::new(Store::new(dir), token.map(str::to_string)))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

fn small_config(seed: u64) -> CampaignConfig {
    let mut cfg = CampaignConfig::new(Strategy::Run4Simplified, seed);
    cfg.schedule = vec![10, 2];
    cfg.oracle = Some(OracleSpec::default());
    cfg
}

/// Oracle answers for the open batch in `view`, as a results body.
fn answers(oracle: &Oracle, view: &Value, request_id: &str) -> Value {
    let batch = view["state"]["batch_index"].as_u64().unwrap();
    let results: Vec<Value> = view["state"]["history"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["batch_index"].as_u64() == Some(batch) && e["measured"].is_null())
        .map(|e| {
            let recipe = serde_json::from_value(e["recipe"].clone()).unwrap();
            let id = e["id"].as_u64().unwrap();
            json!({ "id": id, "metrics": oracle.query(&recipe, id).unwrap() })
        })
        .collect();
    json!({ "request_id": request_id, "results": results })
}

#[tokio::test]
async fn create_then_get_round_trips_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), None);
    let cfg = small_config(1);
    let (s, created) = call(&app, "POST", "/campaigns", Some(json!({ "id": "c1", "config": cfg }))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(created["id"], "c1");
    let (s, got) = call(&app, "GET", "/campaigns/c1", None).await;
    assert_eq!(s, StatusCode::OK);
    let back: CampaignConfig = serde_json::from_value(got["state"]["config"].clone()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(got["state"]["status"], "ready_to_propose");

    // Same id and config is idempotent; a different config conflicts.
    let (s, _) = call(&app, "POST", "/campaigns", Some(json!({ "id": "c1", "config": cfg }))).await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, e) = call(&app, "POST", "/campaigns", Some(json!({ "id": "c1", "config": small_config(2) }))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(e["code"], "conflict");

    let (_, list) = call(&app, "GET", "/campaigns", None).await;
    assert_eq!(list, json!(["c1"]));
}

#[tokio::test]
async fn lifecycle_conflicts_and_idempotency() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), None);
    let oracle = Oracle::synthetic_default();
    call(&app, "POST", "/campaigns", Some(json!({ "id": "c", "config": small_config(4) }))).await;

    let (s, job) = call(&app, "POST", "/campaigns/c/propose?wait=true", Some(json!({ "request_id": "p0" }))).await;
    assert_eq!(s, StatusCode::OK, "{job}");
    assert_eq!(job["status"], "done");
    assert_eq!(job["experiments"].as_array().unwrap().len(), 10);

    // Awaiting results: proposing again conflicts, repeating p0 does not.
    let (s, e) = call(&app, "POST", "/campaigns/c/propose?wait=true", Some(json!({ "request_id": "p1" }))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(e["code"], "conflict");
    let (s, again) = call(&app, "POST", "/campaigns/c/propose?wait=true", Some(json!({ "request_id": "p0" }))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(again["experiments"], job["experiments"]);

    let (_, view) = call(&app, "GET", "/campaigns/c", None).await;
    assert_eq!(view["state"]["batch_index"], 0);
    let body = answers(&oracle, &view, "r0");
    let (s, after) = call(&app, "POST", "/campaigns/c/results", Some(body.clone())).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(after["state"]["batch_index"], 1);
    let (s, repeat) = call(&app, "POST", "/campaigns/c/results", Some(body)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(repeat["state"], after["state"]);

    // A proposal in flight holds the writer lock.
    let (s, job) = call(&app, "POST", "/campaigns/c/propose", Some(json!({ "request_id": "p2" }))).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let (s, _) = call(&app, "POST", "/campaigns/c/propose", Some(json!({ "request_id": "p3" }))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, same) = call(&app, "POST", "/campaigns/c/propose", Some(json!({ "request_id": "p2" }))).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    assert_eq!(same["id"], job["id"]);
    let uri = format!("/jobs/{}", job["id"].as_str().unwrap());
    let done = loop {
        let (_, j) = call(&app, "GET", &uri, None).await;
        if j["status"] != "running" {
            break j;
        }
        tokio::time::sleep(std::time::Duration::from_millis(50)).await;
    };
    assert_eq!(done["status"], "done", "{done}");
    assert_eq!(done["experiments"].as_array().unwrap().len(), 2);

    let (_, hist) = call(&app, "GET", "/campaigns/c/history", None).await;
    assert_eq!(hist.as_array().unwrap().len(), 12);
    let (s, diag) = call(&app, "GET", "/campaigns/c/diagnostics", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(diag["schema"], "diagnostics_v1");
    let (s, csv) = call(&app, "GET", "/campaigns/c/plot-data", None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(csv.as_str().unwrap().starts_with("batch,id,provenance"));
}

#[tokio::test]
async fn errors_use_the_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), None);
    let (s, e) = call(&app, "GET", "/campaigns/missing/summary", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(e["code"], "not_found");
    let (s, e) = call(&app, "POST", "/campaigns", Some(json!({ "config": { "strategy": "run9" } }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(e["code"], "invalid_input");
    let (s, e) = call(&app, "GET", "/campaigns/..%2Fetc/summary", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(e["code"], "invalid_input");
    let (s, _) = call(&app, "GET", "/jobs/job-99", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn bearer_token_is_enforced_when_configured() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), Some("s3cret"));
    let (s, _) = call(&app, "GET", "/campaigns", None).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    let req = Request::builder()
        .uri("/campaigns")
        .header("authorization", "Bearer s3cret")
        .body(Body::empty())
        .unwrap();
    assert_eq!(app.oneshot(req).await.unwrap().status(), StatusCode::OK);
}

#[tokio::test]
async fn http_sequence_matches_cli_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(9);
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_compound-bo"))
        .args(["--state-dir", dir.path().join("cli").to_str().unwrap()])
        .args(["simulate", "--config", cfg_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cli_summary: Value = serde_json::from_slice(&out.stdout).unwrap();

    let app = app(&dir.path().join("http"), None);
    let oracle = Oracle::from_spec(cfg.oracle.clone().unwrap(), dir.path()).unwrap();
    let (s, _) = call(&app, "POST", "/campaigns", Some(json!({ "id": "h", "config": cfg }))).await;
    assert_eq!(s, StatusCode::CREATED);
    for b in 0..cfg.schedule.len() {
        let (s, _) = call(&app, "POST", "/campaigns/h/propose?wait=true", Some(json!({}))).await;
        assert_eq!(s, StatusCode::OK);
        let (_, view) = call(&app, "GET", "/campaigns/h", None).await;
        let (s, _) = call(&app, "POST", "/campaigns/h/results", Some(answers(&oracle, &view, &format!("b{b}")))).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (_, http_summary) = call(&app, "GET", "/campaigns/h/summary", None).await;
    assert_eq!(http_summary["status"], "complete");
    assert_eq!(http_summary, cli_summary);
}
