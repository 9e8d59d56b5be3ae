mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mailmine::export::validate_xes;
use mailmine::run::Run;
use mailmine::service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

use common::{cli, fixture, labeled_run, mission_run, LABELS};

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(Body::from(body.map(|b| b.to_string()).unwrap_or_default())).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (status, body) = call(app, Method::GET, uri, None).await;
    (status, serde_json::from_str(&body).unwrap_or(Value::Null))
}

fn app_for(run: Run) -> (Arc<AppState>, Router) {
    let state = AppState::new(run, None);
    (state.clone(), router(state))
}

#[tokio::test]
async fn read_endpoints() {
    let (_, app) = app_for(mission_run());
    let (status, run) = get_json(&app, "/api/v1/run").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(run["emails"], 20);
    assert_eq!(run["topics"]["clusters"], 2);

    let (_, topics) = get_json(&app, "/api/v1/topics").await;
    assert_eq!(topics[0]["email_ids"], json!([1, 2, 3, 4, 16, 20, 21, 22, 23]));

    let (status, tree) = get_json(&app, "/api/v1/dendrogram").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(tree["cut_k"], 2);

    let (status, tree) = get_json(&app, "/api/v1/topics/1/dendrogram").await;
    assert_eq!(status, StatusCode::OK);
    assert!(tree["tree"].is_object());

    let (_, instances) = get_json(&app, "/api/v1/topics/1/instances").await;
    let groups: Vec<Value> = instances.as_array().unwrap().iter().map(|i| i["email_ids"].clone()).collect();
    assert_eq!(groups, vec![json!([1, 2, 3, 4, 16]), json!([20, 21, 22, 23])]);

    let (_, acts) = get_json(&app, "/api/v1/topics/1/activities").await;
    assert_eq!(acts["k"], 4);
    let first = &acts["activities"][0];
    assert_eq!(first["email_ids"], json!([1, 20]));
    assert!(first["medoid"]["body"].as_str().unwrap().contains("mission application"));
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let (_, app) = app_for(mission_run());
    for uri in ["/api/v1/topics/9/instances", "/api/v1/topics/9/activities", "/api/v1/topics/9/dendrogram", "/api/v1/nope"] {
        assert_eq!(call(&app, Method::GET, uri, None).await.0, StatusCode::NOT_FOUND, "{uri}");
    }
    let (status, _) = call(&app, Method::PUT, "/api/v1/activities/99/label", Some(json!({"label": "x"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn label_then_export_shows_labels() {
    let (_, app) = app_for(mission_run());
    let (status, body) = call(&app, Method::PUT, "/api/v1/activities/1/label", Some(json!({"label": "submit demand"}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let (status, _) = call(&app, Method::GET, "/api/v1/export/csv?topic=1", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    for (id, label) in &LABELS[1..] {
        let uri = format!("/api/v1/activities/{id}/label");
        assert_eq!(call(&app, Method::PUT, &uri, Some(json!({ "label": label }))).await.0, StatusCode::OK);
    }
    let (status, csv) = call(&app, Method::GET, "/api/v1/export/csv", None).await;
    assert_eq!(status, StatusCode::OK);
    let submitted: Vec<&str> =
        csv.lines().filter(|l| l.contains(",submit demand,")).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(submitted, ["1", "20"]);
    assert_eq!(csv.as_bytes(), std::fs::read(fixture("event_log.csv")).unwrap());

    let (status, xes) = call(&app, Method::GET, "/api/v1/export/xes", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(validate_xes(&xes).unwrap().events, 9);
    let (status, dot) = call(&app, Method::GET, "/api/v1/export/dot", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(dot.contains("\"accept demand or refuse demand\" -> \"accept demand or refuse demand\""));
    assert_eq!(call(&app, Method::GET, "/api/v1/export/pdf", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn empty_label_is_422_and_repeats_are_idempotent() {
    let (state, app) = app_for(mission_run());
    let (status, _) = call(&app, Method::PUT, "/api/v1/activities/1/label", Some(json!({"label": "  "}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let body = Some(json!({"label": "submit demand"}));
    let (_, first) = call(&app, Method::PUT, "/api/v1/activities/1/label", body.clone()).await;
    let after_first = state.snapshot().await.to_json();
    let (status, second) = call(&app, Method::PUT, "/api/v1/activities/1/label", body).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_str::<Value>(&first).unwrap()["changed"], true);
    assert_eq!(serde_json::from_str::<Value>(&second).unwrap()["changed"], false);
    assert_eq!(state.snapshot().await.to_json(), after_first);
}

#[tokio::test]
async fn label_writes_during_recut_are_409() {
    let (state, app) = app_for(mission_run());
    let guard = state.recut_guard();
    let (status, body) = call(&app, Method::PUT, "/api/v1/activities/1/label", Some(json!({"label": "x"}))).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    drop(guard);
    let (status, _) = call(&app, Method::PUT, "/api/v1/activities/1/label", Some(json!({"label": "x"}))).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn recut_to_one_topic_invalidates_downstream() {
    let (_, app) = app_for(mission_run());
    let (status, body) =
        call(&app, Method::POST, "/api/v1/recut", Some(json!({"phase": "topics", "k": 1, "rerun": false}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let (_, topics) = get_json(&app, "/api/v1/topics").await;
    assert_eq!(topics.as_array().unwrap().len(), 1);
    assert_eq!(topics[0]["email_ids"].as_array().unwrap().len(), 20);
    let (status, err) = get_json(&app, "/api/v1/topics/1/instances").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"]["kind"], "missing_phase");
    let (status, _) = call(&app, Method::PUT, "/api/v1/activities/1/label", Some(json!({"label": "x"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn recut_reruns_and_keeps_unchanged_labels() {
    let (_, app) = app_for(labeled_run());
    let (status, body) = call(&app, Method::POST, "/api/v1/recut", Some(json!({"phase": "topics", "k": 2}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let (status, _) = call(&app, Method::GET, "/api/v1/export/csv?topic=1", None).await;
    assert_eq!(status, StatusCode::OK);

    let (status, _) = call(&app, Method::POST, "/api/v1/recut", Some(json!({"phase": "topics", "k": 0}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, Method::POST, "/api/v1/recut", Some(json!({"phase": "topics", "k": 21}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (_, run) = get_json(&app, "/api/v1/run").await;
    assert_eq!(run["labeled_activities"], 4);
}

#[tokio::test]
async fn classify_endpoint() {
    let (_, app) = app_for(mission_run());
    let email = json!({"subject": "mission demand", "body": "Please find enclosed my mission application"});
    let (status, _) = call(&app, Method::POST, "/api/v1/classify", Some(email.clone())).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (_, app) = app_for(labeled_run());
    let (status, body) = call(&app, Method::POST, "/api/v1/classify", Some(email)).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let result: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(result["status"], "classified");
    assert_eq!(result["predicted_label"], "submit demand");

    let (status, body) = call(&app, Method::POST, "/api/v1/classify", Some(json!({"subject": "zzz", "body": "qqq"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["status"], "unclassifiable");
    let (status, _) =
        call(&app, Method::POST, "/api/v1/classify", Some(json!({"body": "x", "timestamp": "yesterday"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn mutations_persist_to_the_run_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    mission_run().save(&path).unwrap();
    let app = router(AppState::new(Run::load(&path).unwrap(), Some(path.clone())));
    call(&app, Method::PUT, "/api/v1/activities/2/label", Some(json!({"label": "request information"}))).await;
    assert_eq!(Run::load(&path).unwrap().labels.label(2), Some("request information"));
}

/// The same operations through the CLI and through HTTP leave identical run files.
#[tokio::test]
async fn cli_and_http_produce_identical_run_files() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("base.json");
    let table = fixture("table1.csv");
    for args in [
        vec!["ingest", "--input", table.to_str().unwrap()],
        vec!["topics", "--k", "2"],
        vec!["instances"],
        vec!["activities", "--k", "4", "--topic", "1"],
    ] {
        assert_eq!(cli(&base, &args, "").code, 0);
    }
    let via_cli = dir.path().join("cli.json");
    let via_http = dir.path().join("http.json");
    std::fs::copy(&base, &via_cli).unwrap();
    std::fs::copy(&base, &via_http).unwrap();

    let answers: String = LABELS.iter().map(|(_, l)| format!("{l}\n")).collect();
    assert_eq!(cli(&via_cli, &["label"], &answers).code, 0);
    assert_eq!(cli(&via_cli, &["recut", "--phase", "instances", "--k", "2", "--topic", "1"], "").code, 0);

    let app = router(AppState::new(Run::load(&via_http).unwrap(), Some(via_http.clone())));
    for (id, label) in LABELS {
        let uri = format!("/api/v1/activities/{id}/label");
        assert_eq!(call(&app, Method::PUT, &uri, Some(json!({ "label": label }))).await.0, StatusCode::OK);
    }
    let recut = json!({"phase": "instances", "k": 2, "topic_id": 1});
    assert_eq!(call(&app, Method::POST, "/api/v1/recut", Some(recut)).await.0, StatusCode::OK);

    assert_eq!(std::fs::read(&via_cli).unwrap(), std::fs::read(&via_http).unwrap());
}
