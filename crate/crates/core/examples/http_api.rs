//! Exercises the HTTP API in-process: list topics, label an activity and
//! fetch the export. Pass `--serve ADDR` to listen on a socket instead.
//!
//! cargo run --example http_api

use axum::body::Body;
use axum::http::{Method, Request};
use http_body_util::BodyExt;
use mailmine::config::PipelineConfig;
use mailmine::ingest::{parse_csv, CsvSchema};
use mailmine::pipeline::CutSetting;
use mailmine::run::Run;
use mailmine::service::{router, AppState};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: Method, uri: &str, body: Option<&str>) -> (u16, String) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(Body::from(body.unwrap_or_default().to_string())).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8_lossy(&bytes).into_owned())
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = parse_csv(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/table1.csv"), &CsvSchema::default())?;
    let mut run = Run::new(corpus, PipelineConfig::default())?;
    run.run_topics(Some(CutSetting::K(2)))?;
    run.run_instances(None, None)?;
    run.run_activities(Some(4), Some(1), None)?;

    let args: Vec<String> = std::env::args().collect();
    if let Some(pos) = args.iter().position(|a| a == "--serve") {
        let addr = args.get(pos + 1).map(String::as_str).unwrap_or("127.0.0.1:8080");
        let listener = tokio::net::TcpListener::bind(addr).await?;
        println!("listening on http://{}/api/v1", listener.local_addr()?);
        axum::serve(listener, router(AppState::new(run, None))).await?;
        return Ok(());
    }

    let app = router(AppState::new(run, None));
    let (status, body) = call(&app, Method::GET, "/api/v1/topics/1/activities", None).await;
    println!("GET activities -> {status}, {} bytes", body.len());
    for (id, label) in
        [(1, "submit demand"), (2, "request information"), (3, "respond information"), (4, "accept demand or refuse demand")]
    {
        let payload = serde_json::json!({ "label": label }).to_string();
        let (status, body) = call(&app, Method::PUT, &format!("/api/v1/activities/{id}/label"), Some(&payload)).await;
        println!("PUT label {id} -> {status} {body}");
    }
    let (status, body) = call(&app, Method::PUT, "/api/v1/activities/1/label", Some(r#"{"label":"  "}"#)).await;
    println!("PUT empty label -> {status} {body}");
    let (status, body) = call(&app, Method::GET, "/api/v1/export/csv?topic=1", None).await;
    println!("GET export/csv -> {status}\n{body}");
    Ok(())
}
