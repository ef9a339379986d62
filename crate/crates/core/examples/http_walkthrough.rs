//! The basic editing walkthrough over HTTP against an in-process server:
//! import, place, select, move, generate, then restore.
//!
//! ```bash
//! cargo run --example http_walkthrough
//! ```

use canvas_blend::api::{self, AppState};
use canvas_blend::backend::{Engine, SyntheticBackend};
use canvas_blend::config::Config;
use serde_json::{json, Value};

#[tokio::main]
async fn main() {
    let data = tempfile::tempdir().unwrap();
    let mut config = Config::default();
    config.service.data_dir = data.path().to_path_buf();
    let state = AppState::open(&config, Engine::synthetic(config.masks.feather_px)).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}/v1", listener.local_addr().unwrap());
    tokio::spawn(async move { axum::serve(listener, api::router(state)).await.unwrap() });
    println!("serving on {base}");

    let http = reqwest::Client::new();
    let call = |method: reqwest::Method, path: String, body: Option<Value>| {
        let req = http.request(method, format!("{base}{path}"));
        let req = match body {
            Some(b) => req.json(&b),
            None => req,
        };
        async move { req.send().await.unwrap().json::<Value>().await.unwrap() }
    };
    use reqwest::Method;

    let session = call(Method::POST, "/sessions".into(), None).await;
    let sid = session["session_id"].as_str().unwrap().to_string();
    let faces = SyntheticBackend::new();
    let mut upload = Vec::new();
    for seed in [1, 2] {
        let v: Value = http
            .post(format!("{base}/sessions/{sid}/images"))
            .body(faces.portrait_png(seed))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        upload.push(v["image"].as_str().unwrap().to_string());
    }
    let (target, reference) = (&upload[0], &upload[1]);

    call(Method::PUT, format!("/sessions/{sid}/target"), Some(json!({ "image": target }))).await;
    call(Method::POST, format!("/sessions/{sid}/references"), Some(json!({ "image": reference, "position": { "x": 1100, "y": 100 } }))).await;
    call(Method::PUT, format!("/sessions/{sid}/references/{reference}/attributes"), Some(json!({ "attributes": ["mouth", "age"] }))).await;
    let preview = call(Method::GET, format!("/sessions/{sid}/preview?x=720&y=430"), None).await;
    println!("drag preview at (720,430): weight {} line {}", preview["weight"], preview["line"]["color"]);
    let moved = call(Method::PATCH, format!("/sessions/{sid}/references/{reference}"), Some(json!({ "position": { "x": 720, "y": 430 } }))).await;
    println!("after drop: weights {}", moved["placements"][0]["weights"]);

    let generated = call(Method::POST, format!("/sessions/{sid}/generate"), None).await;
    let id = generated["entry"]["id"].as_u64().unwrap();
    println!("generated history #{id}: {}", generated["entry"]["result_image"]);
    let png = http.get(format!("{base}/sessions/{sid}/history/{id}/image")).send().await.unwrap().bytes().await.unwrap();
    println!("result: {} bytes of PNG", png.len());

    call(Method::POST, format!("/sessions/{sid}/reset"), None).await;
    let restored = call(Method::POST, format!("/sessions/{sid}/history/{id}/restore"), None).await;
    println!("restored: {} placement(s), undo depth {}", restored["placements"].as_array().unwrap().len(), restored["undo_depth"]);
}
