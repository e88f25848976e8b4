use std::fs;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use corae_service::{router, FileStore, ServiceDefaults, SessionService};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

struct App {
    _dir: TempDir,
    router: Router,
}

fn app() -> App {
    let dir = tempfile::tempdir().unwrap();
    let media = dir.path().join("media");
    fs::create_dir(&media).unwrap();
    fs::write(media.join("clip.mp4"), (0..=255u8).cycle().take(10_000).collect::<Vec<_>>()).unwrap();
    let statics = dir.path().join("static");
    fs::create_dir(&statics).unwrap();
    fs::write(statics.join("dashboard.js"), "export {};\n").unwrap();
    let store = FileStore::open(dir.path().join("data")).unwrap();
    let defaults = ServiceDefaults { media_dir: media, ..ServiceDefaults::default() };
    let service = Arc::new(SessionService::open(Box::new(store), defaults).unwrap());
    App { router: router(service, Some(&statics)), _dir: dir }
}

struct Reply {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| {
            panic!("{e}: {}", String::from_utf8_lossy(&self.body))
        })
    }

    fn text(&self) -> String {
        String::from_utf8(self.body.clone()).unwrap()
    }
}

impl App {
    async fn send(&self, req: Request<Body>) -> Reply {
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        Reply { status, headers, body }
    }

    async fn get(&self, uri: &str) -> Reply {
        self.send(Request::get(uri).body(Body::empty()).unwrap()).await
    }

    async fn post(&self, uri: &str, body: impl Into<Body>) -> Reply {
        let req = Request::post(uri)
            .header(header::CONTENT_TYPE, "application/json")
            .body(body.into())
            .unwrap();
        self.send(req).await
    }

    async fn post_json(&self, uri: &str, body: Value) -> Reply {
        self.post(uri, body.to_string()).await
    }

    async fn create(&self) -> Value {
        let r = self
            .post_json(
                "/api/sessions",
                json!({"media_path": "clip.mp4", "frame_rate": 30, "duration_seconds": 60}),
            )
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
        r.json()
    }
}

fn batch(entries: &[(i32, &str, &str)]) -> Value {
    json!({
        "annotations": entries
            .iter()
            .map(|(r, tc, c)| json!({"rating": r, "timecode": tc, "cause": c}))
            .collect::<Vec<_>>()
    })
}

#[tokio::test]
async fn dashboard_page_states() {
    let app = app();
    let s = app.create().await;
    let token = s["tokens"][0].as_str().unwrap();
    let url = s["urls"][0].as_str().unwrap();

    let page = app.get(url).await;
    assert_eq!(page.status, StatusCode::OK);
    assert_eq!(page.headers[header::REFERRER_POLICY], "no-referrer");
    assert!(page.text().contains("data-state=\"identify\""));
    assert!(page.text().contains("/static/dashboard.js"));

    let r = app.post_json(&format!("/api/annotator/{token}/identity"), json!({"participant_id": "<P01>"})).await;
    assert_eq!(r.status, StatusCode::OK);
    assert!(app.get(url).await.text().contains("data-state=\"annotate\""));

    app.post_json(&format!("/api/annotator/{token}/annotations"), batch(&[(0, "00:00:00:00", "interval")])).await;
    let done = app.post(&format!("/api/annotator/{token}/complete"), "").await;
    assert_eq!(done.status, StatusCode::OK);
    let completed = app.get(url).await.text();
    assert!(completed.contains("data-state=\"completed\""));
    assert!(completed.contains("&lt;P01&gt;"));
    assert!(!completed.contains("<P01>"));

    let bad = app.get("/a/not-a-real-token").await;
    assert_eq!(bad.status, StatusCode::FORBIDDEN);
    assert!(app.get("/static/dashboard.js").await.status.is_success());
}

#[tokio::test]
async fn annotation_flow_over_http() {
    let app = app();
    let s = app.create().await;
    let token = s["tokens"][0].as_str().unwrap();
    let api = format!("/api/annotator/{token}");

    let early = app.post_json(&format!("{api}/annotations"), batch(&[(0, "00:00:00:00", "interval")])).await;
    assert_eq!(early.status, StatusCode::CONFLICT);
    assert_eq!(early.json()["error"], "identifier_required");

    app.post_json(&format!("{api}/identity"), json!({"participant_id": "P01"})).await;
    let three = batch(&[(0, "00:00:00:00", "interval"), (1, "00:00:00:12", "change"), (1, "00:00:01:00", "interval")]);
    let ack = app.post_json(&format!("{api}/annotations"), three.clone()).await;
    assert_eq!(ack.status, StatusCode::OK);
    assert_eq!(ack.json(), json!({"last_timecode": "00:00:01:00", "records": 3, "duplicate": false}));

    let again = app.post_json(&format!("{api}/annotations"), three).await;
    assert_eq!(again.json()["duplicate"], true);
    let gap = app
        .post(&format!("{api}/annotations"), r#"{"offset": 9, "annotations": [{"rating": 1, "timecode": "00:00:02:00", "cause": "interval"}]}"#)
        .await;
    assert_eq!(gap.status, StatusCode::CONFLICT);
    assert_eq!(gap.json()["ack"]["records"], 3);

    let jump = app
        .post_json(&format!("{api}/annotations"), batch(&[(1, "00:00:02:00", "interval"), (3, "00:00:02:05", "change")]))
        .await;
    assert_eq!(jump.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(jump.json()["violations"][0]["index"], 1);

    let stale = app.post_json(&format!("{api}/annotations"), batch(&[(0, "00:00:00:20", "change")])).await;
    assert_eq!(stale.status, StatusCode::CONFLICT);
    assert_eq!(stale.json()["ack"]["records"], 3);

    let malformed = app.post(&format!("{api}/annotations"), "{\"annotations\": 5}").await;
    assert_eq!(malformed.status, StatusCode::BAD_REQUEST);

    let info = app.get(&api).await.json();
    assert_eq!(info["ack"]["records"], 3);
    assert_eq!(info["frame_rate"], 30);

    let log = app.get(&format!("{api}/log")).await;
    assert_eq!(log.headers[header::CONTENT_TYPE], "application/json");
    assert!(log.text().contains("\"participant_id\": \"P01\""));

    let unknown = app.get("/api/annotator/AAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAA").await;
    assert_eq!(unknown.status, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn upload_then_analysis() {
    let app = app();
    let s = app.create().await;
    let id = s["session_id"].as_str().unwrap();

    let pending = app.get(&format!("/api/sessions/{id}/analysis")).await;
    assert_eq!(pending.status, StatusCode::CONFLICT);

    let legacy_a = r#"[{"0": "00:00:00:00"}, {"1": "00:00:05:00"}, {"2": "00:00:06:00"}, {"2": "00:00:40:00"}]"#;
    let legacy_b = r#"[{"0": "00:00:00:00"}, {"-1": "00:00:05:00"}, {"-1": "00:00:40:00"}]"#;
    for (slot, body) in [(0, legacy_a), (1, legacy_b)] {
        app.post_json(&format!("/api/annotator/{}/identity", s["tokens"][slot].as_str().unwrap()), json!({"participant_id": format!("P{slot}")})).await;
        let r = app.post(&format!("/api/sessions/{id}/upload?slot={slot}"), body).await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
        assert_eq!(r.json()["legacy"], true);
    }
    let status = app.get(&format!("/api/sessions/{id}")).await.json();
    assert_eq!(status["state"], "sealed");

    let report = app.get(&format!("/api/sessions/{id}/analysis?window=9&lag=5")).await;
    assert_eq!(report.status, StatusCode::OK, "{}", report.text());
    let v = report.json();
    assert_eq!(v["config"]["window_seconds"], 9.0);
    assert_eq!(v["a"]["cir"].as_array().unwrap().len(), 61);
    let again = app.get(&format!("/api/sessions/{id}/analysis?window=9&lag=5")).await;
    assert_eq!(again.body, report.body);

    let typo = app.get(&format!("/api/sessions/{id}/analysis?windw=9")).await;
    assert_eq!(typo.status, StatusCode::BAD_REQUEST);
    let bad = app.get(&format!("/api/sessions/{id}/analysis?window=0.5")).await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);
    assert_eq!(bad.json()["error"], "invalid_config");
    assert_eq!(app.get("/api/sessions/nope/analysis").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn media_supports_ranges() {
    let app = app();
    let s = app.create().await;
    let token = s["tokens"][0].as_str().unwrap();
    let media_url = app.get(&format!("/api/annotator/{token}")).await.json()["media_url"]
        .as_str()
        .unwrap()
        .to_owned();
    assert!(!media_url.contains(s["session_id"].as_str().unwrap()));

    let whole = app.get(&media_url).await;
    assert_eq!(whole.status, StatusCode::OK);
    assert_eq!(whole.body.len(), 10_000);

    let req = Request::get(&media_url).header(header::RANGE, "bytes=256-511").body(Body::empty()).unwrap();
    let part = app.send(req).await;
    assert_eq!(part.status, StatusCode::PARTIAL_CONTENT);
    assert_eq!(part.body, (0..=255u8).collect::<Vec<_>>());
    assert_eq!(part.headers[header::CONTENT_RANGE], "bytes 256-511/10000");

    assert_eq!(app.get("/media/unknown").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn create_validates_input() {
    let app = app();
    let r = app.post_json("/api/sessions", json!({"media_path": "clip.mp4", "frame_rate": 0, "duration_seconds": 60})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let r = app.post_json("/api/sessions", json!({"media_path": "/etc/hostname", "frame_rate": 30, "duration_seconds": 60})).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"], "media");
    let r = app
        .post_json("/api/sessions", json!({"media_path": "clip.mp4", "frame_rate": 25, "duration_seconds": 60, "participants": 1, "scale": {"min": -3, "max": 3}}))
        .await;
    assert_eq!(r.status, StatusCode::CREATED);
    assert_eq!(r.json()["tokens"].as_array().unwrap().len(), 1);
}
