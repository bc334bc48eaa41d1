mod common;

use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use warp_service::{router, EventKind, ServiceEvent, Status};

use common::*;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() })
}

#[tokio::test]
async fn fresh_server_lists_no_sessions() {
    let app = router(service());
    let (status, body) = call(&app, "GET", "/api/sessions", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!([]));
}

#[tokio::test]
async fn unknown_ids_are_404_payloads() {
    let app = router(service());
    for (method, uri) in [
        ("POST", "/api/solutions/nope/apply"),
        ("POST", "/api/solutions/nope/reject"),
        ("GET", "/api/solutions/nope/evidence"),
        ("GET", "/api/sessions/s9"),
        ("GET", "/api/sessions/s9/solutions"),
    ] {
        let (status, body) = call(&app, method, uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{method} {uri}");
        assert_eq!(body["error"], "NotFound");
        assert!(body["message"].as_str().unwrap().contains("nope") || uri.contains("s9"));
    }
}

#[tokio::test]
async fn full_loop_over_http() {
    let project = Project::new(SEMICOLON);
    let app = router(service());
    let (status, created) =
        call(&app, "POST", "/api/sessions", Some(json!({"command_line": BUILD, "working_dir": project.path()}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let sid = created["id"].as_str().unwrap().to_string();
    assert_eq!(created["status"], "Idle");

    let (status, built) = call(&app, "POST", &format!("/api/sessions/{sid}/build?wait=true"), None).await;
    assert_eq!(status, StatusCode::OK, "{built}");
    assert_eq!(built["status"], "AwaitingDecision");

    let (_, list) = call(&app, "GET", "/api/sessions", None).await;
    assert_eq!(list[0]["status"], "AwaitingDecision");
    assert_eq!(list[0]["error"]["line"], built["error_context"]["line"]);

    let (_, solutions) = call(&app, "GET", &format!("/api/sessions/{sid}/solutions"), None).await;
    let solutions = solutions.as_array().unwrap().clone();
    assert!(!solutions.is_empty());
    let top = &solutions[0];
    let solution_id = top["id"].as_str().unwrap();
    assert_eq!(top["rank"], 1);
    assert_eq!(top["provenance"], "Synthesized");

    // Every citation chip resolves to a snippet, and cited rows come first.
    let (status, ev) = call(&app, "GET", &format!("/api/solutions/{solution_id}/evidence"), None).await;
    assert_eq!(status, StatusCode::OK);
    let citations: Vec<&str> = top["citations"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    assert!(!citations.is_empty());
    let rows = ev["evidence"].as_array().unwrap();
    for (i, c) in citations.iter().enumerate() {
        assert_eq!(rows[i]["id"], *c);
        assert_eq!(rows[i]["cited"], true);
        assert!(rows[i]["url"].as_str().unwrap().starts_with("http"));
        assert!(top["explanation"].as_str().unwrap().contains(&format!("[ev:{c}]")));
    }
    assert!(rows[citations.len()..].iter().all(|r| r["cited"] == false));

    assert!(!project.compiles());
    let (status, applied) = call(&app, "POST", &format!("/api/solutions/{solution_id}/apply"), None).await;
    assert_eq!(status, StatusCode::OK, "{applied}");
    assert_eq!(applied["session"]["status"], "Applied");
    assert!(project.compiles(), "patched file compiles");
    assert_eq!(std::fs::read_to_string(project.source()).unwrap(), project.fixed());

    let (status, again) = call(&app, "POST", &format!("/api/solutions/{solution_id}/apply"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(again["error"], "InvalidState");
    let (status, _) = call(&app, "POST", &format!("/api/solutions/{solution_id}/reject"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn stale_file_and_reject_over_http() {
    let project = Project::new(SEMICOLON);
    let svc = service();
    let app = router(svc.clone());
    let sid = svc.create_session(BUILD, &project.path()).unwrap().id;
    let (_, built) = call(&app, "POST", &format!("/api/sessions/{sid}/build?wait=true"), None).await;
    let solution_id = built["solutions"][0]["id"].as_str().unwrap().to_string();

    let edited = format!("{}\n/* edited */\n", std::fs::read_to_string(project.source()).unwrap());
    std::fs::write(project.source(), &edited).unwrap();
    let (status, body) = call(&app, "POST", &format!("/api/solutions/{solution_id}/apply"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "StaleFile");
    assert_eq!(std::fs::read_to_string(project.source()).unwrap(), edited, "no write");

    let (status, body) = call(&app, "POST", &format!("/api/solutions/{solution_id}/reject"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "Rejected");
}

fn parse_sse(buf: &str) -> Vec<ServiceEvent> {
    buf.split("\n\n")
        .filter_map(|frame| frame.lines().find_map(|l| l.strip_prefix("data:")))
        .filter_map(|d| serde_json::from_str(d.trim()).ok())
        .collect()
}

#[tokio::test]
async fn event_stream_follows_the_state_machine() {
    let project = Project::new(SEMICOLON);
    let svc = service();
    let app = router(svc.clone());
    let sid = svc.create_session(BUILD, &project.path()).unwrap().id;

    let resp = app.clone().oneshot(Request::get("/api/events").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    let mut body = resp.into_body();

    let (status, _) = call(&app, "POST", &format!("/api/sessions/{sid}/build"), None).await;
    assert_eq!(status, StatusCode::ACCEPTED);

    let mut buf = String::new();
    let events = tokio::time::timeout(Duration::from_secs(20), async {
        loop {
            let frame = body.frame().await.expect("stream open").unwrap();
            if let Some(d) = frame.data_ref() {
                buf.push_str(std::str::from_utf8(d).unwrap());
            }
            let events = parse_sse(&buf);
            if events.iter().any(|e| e.status == Status::AwaitingDecision) {
                return events;
            }
        }
    })
    .await
    .expect("AwaitingDecision within 20 s");

    let statuses: Vec<&str> = events.iter().filter(|e| e.kind == EventKind::Status).map(|e| e.stage.as_str()).collect();
    assert_eq!(statuses, ["Building", "Analyzing", "AwaitingDecision"]);
    let stages: Vec<&str> = events.iter().filter(|e| e.kind == EventKind::Stage).map(|e| e.stage.as_str()).collect();
    assert!(stages.contains(&"hypothesis") && stages.contains(&"synthesis"), "{stages:?}");
    // Pipeline stages run while the session is Analyzing.
    let analyzing = events.iter().position(|e| e.stage == "Analyzing").unwrap();
    let awaiting = events.iter().position(|e| e.stage == "AwaitingDecision").unwrap();
    for (i, e) in events.iter().enumerate().filter(|(_, e)| e.kind == EventKind::Stage) {
        assert!(analyzing < i && i < awaiting, "{e:?}");
        assert_eq!(e.status, Status::Analyzing);
    }
    for w in events.windows(2) {
        assert!(w[0].seq < w[1].seq);
        assert!(w[0].timestamp <= w[1].timestamp);
    }
    assert!(events.iter().all(|e| e.session_id == sid && e.timestamp > 0));
}
