use std::process::Command;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use padres_core::config::Config;
use padres_service::{router, AppState};

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let body = body.map_or_else(Body::empty, |v| Body::from(v.to_string()));
    let req = Request::builder().method(method).uri(uri).body(body).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn value(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[tokio::test(flavor = "multi_thread")]
async fn cli_and_service_give_identical_resonance_json() {
    let cli = Command::new(env!("CARGO_BIN_EXE_padres")).args(["resonance", "--json"]).output().unwrap();
    assert!(cli.status.success(), "{}", String::from_utf8_lossy(&cli.stderr));
    let cli_json = String::from_utf8(cli.stdout).unwrap();
    let fit_id = value(&cli_json)["search"]["fit_id"].as_str().unwrap().to_string();

    let app = router(AppState::new(Config::default(), None));
    let (status, s) = call(&app, Method::POST, "/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = value(&s)["id"].as_str().unwrap().to_string();
    let (status, job) = call(&app, Method::POST, &format!("/sessions/{id}/stabilize"), None).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let job = value(&job)["job_id"].as_str().unwrap().to_string();
    loop {
        let (_, v) = call(&app, Method::GET, &format!("/jobs/{job}"), None).await;
        match value(&v)["status"].as_str().unwrap() {
            "running" => tokio::time::sleep(Duration::from_millis(50)).await,
            "done" => break,
            other => panic!("job {other}: {v}"),
        }
    }
    let (status, windows) = call(&app, Method::POST, &format!("/sessions/{id}/windows"), None).await;
    assert_eq!(status, StatusCode::OK);

    // The CLI's default window, found in the service's window report.
    let cli_value = value(&cli_json);
    let window_id = cli_value["points"][0]["point"]["window_id"].as_str().unwrap();
    assert!(value(&windows)["report"]["windows"].as_array().unwrap().iter().any(|w| w["id"] == window_id));
    let (status, fit) = call(&app, Method::POST, &format!("/sessions/{id}/fit"), Some(json!({ "window_id": window_id }))).await;
    assert_eq!(status, StatusCode::OK, "{fit}");
    assert_eq!(value(&fit)["id"], fit_id.as_str());
    let (status, service_json) = call(&app, Method::POST, &format!("/sessions/{id}/stationary"), Some(json!({ "fit_id": fit_id }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(service_json, cli_json);
}
