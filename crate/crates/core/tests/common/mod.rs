#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use canvas_blend::api::{self, AppState, HistoryView, SessionView};
use canvas_blend::backend::{Engine, SyntheticBackend};
use canvas_blend::config::Config;
use canvas_blend::scene::SceneSpec;
use canvas_blend::session::Point;
use serde_json::{json, Value};

pub const BIN: &str = env!("CARGO_BIN_EXE_canvas-blend");

pub fn portrait(seed: u64) -> Vec<u8> {
    SyntheticBackend::new().portrait_png(seed)
}

pub fn test_config(data_dir: &Path) -> Config {
    let mut config = Config::default();
    config.service.data_dir = data_dir.to_path_buf();
    config
}

pub struct TestServer {
    pub base: String,
    pub client: reqwest::Client,
    pub state: AppState,
    task: tokio::task::JoinHandle<()>,
}

impl TestServer {
    pub async fn start(data_dir: &Path) -> Self {
        let config = test_config(data_dir);
        let state = AppState::open(&config, Engine::synthetic(config.masks.feather_px)).unwrap();
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let app = api::router(state.clone());
        let task = tokio::spawn(async move {
            axum::serve(listener, app).await.unwrap();
        });
        Self {
            base: format!("http://{addr}/v1"),
            client: reqwest::Client::new(),
            state,
            task,
        }
    }

    pub fn stop(self) {
        self.task.abort();
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    pub async fn json(&self, method: reqwest::Method, path: &str, body: Option<Value>) -> (u16, Value) {
        let mut req = self.client.request(method, self.url(path));
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().await.unwrap();
        let status = resp.status().as_u16();
        let bytes = resp.bytes().await.unwrap();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or(Value::Null)
        };
        (status, value)
    }

    pub async fn create_session(&self, body: Value) -> SessionView {
        let (status, v) = self.json(reqwest::Method::POST, "/sessions", Some(body)).await;
        assert_eq!(status, 201, "{v}");
        serde_json::from_value(v).unwrap()
    }

    pub async fn upload(&self, sid: &str, bytes: Vec<u8>) -> String {
        let resp = self
            .client
            .post(self.url(&format!("/sessions/{sid}/images")))
            .body(bytes)
            .send()
            .await
            .unwrap();
        assert_eq!(resp.status().as_u16(), 201);
        let v: Value = resp.json().await.unwrap();
        v["image"].as_str().unwrap().to_string()
    }

    pub async fn ok(&self, method: reqwest::Method, path: &str, body: Option<Value>) -> Value {
        let (status, v) = self.json(method, path, body).await;
        assert!((200..300).contains(&status), "{path} -> {status}: {v}");
        v
    }

    pub async fn bytes(&self, path: &str) -> Vec<u8> {
        let resp = self.client.get(self.url(path)).send().await.unwrap();
        assert_eq!(resp.status().as_u16(), 200, "{path}");
        resp.bytes().await.unwrap().to_vec()
    }

    /// Generates and returns the history entry plus its stored PNG.
    pub async fn generate(&self, sid: &str) -> (HistoryView, Vec<u8>) {
        let v = self
            .ok(reqwest::Method::POST, &format!("/sessions/{sid}/generate"), None)
            .await;
        let entry: HistoryView = serde_json::from_value(v["entry"].clone()).unwrap();
        let png = self
            .bytes(&format!("/sessions/{sid}/history/{}/image", entry.id))
            .await;
        (entry, png)
    }
}

/// A scene on disk: spec file plus the images it names.
pub struct SceneFixture {
    pub dir: tempfile::TempDir,
    pub spec: SceneSpec,
    /// Where each reference is first dropped before being dragged to its
    /// final position over HTTP.
    pub drop_at: Vec<Option<Point>>,
}

impl SceneFixture {
    pub fn new(spec: Value, images: &[(&str, u64)], drop_at: Vec<Option<Point>>) -> Self {
        let dir = tempfile::tempdir().unwrap();
        for (name, seed) in images {
            fs::write(dir.path().join(name), portrait(*seed)).unwrap();
        }
        fs::write(dir.path().join("scene.json"), serde_json::to_vec_pretty(&spec).unwrap()).unwrap();
        let spec = SceneSpec::from_json(&spec.to_string()).unwrap();
        Self { dir, spec, drop_at }
    }

    pub fn spec_path(&self) -> PathBuf {
        self.dir.path().join("scene.json")
    }

    pub fn read(&self, rel: &Path) -> Vec<u8> {
        fs::read(self.dir.path().join(rel)).unwrap()
    }
}

pub fn cli(args: &[&str]) -> std::process::Output {
    let mut cmd = Command::new(BIN);
    for (k, _) in std::env::vars() {
        if k.starts_with("CANVAS_BLEND_") {
            cmd.env_remove(k);
        }
    }
    cmd.args(args).output().unwrap()
}

/// Renders the scene through the binary and returns the PNG bytes.
pub fn render_via_cli(scene: &SceneFixture) -> Vec<u8> {
    let out = scene.dir.path().join("cli-out.png");
    let spec = scene.spec_path();
    let o = cli(&[
        "render",
        spec.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--force",
    ]);
    assert!(
        o.status.success(),
        "cli failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    fs::read(out).unwrap()
}

/// Replays the scene as a user would over HTTP: import, place, select,
/// move, generate.
pub async fn render_via_http(server: &TestServer, scene: &SceneFixture) -> Vec<u8> {
    use reqwest::Method;
    let spec = &scene.spec;
    let geometry = spec.canvas.geometry();
    let model = spec.canvas.distance_model().unwrap();
    let session = server
        .create_session(json!({
            "canvas": geometry,
            "d_min": model.d_min,
            "d_max": model.d_max,
        }))
        .await;
    let sid = session.session_id;

    let target = server.upload(&sid, scene.read(&spec.target)).await;
    server
        .ok(Method::PUT, &format!("/sessions/{sid}/target"), Some(json!({ "image": target })))
        .await;
    for (i, r) in spec.references.iter().enumerate() {
        let image = server.upload(&sid, scene.read(&r.path)).await;
        let end = r.position.expect("canvas-only scene");
        let start = scene.drop_at.get(i).copied().flatten().unwrap_or(end);
        server
            .ok(
                Method::POST,
                &format!("/sessions/{sid}/references"),
                Some(json!({ "image": image, "position": start })),
            )
            .await;
        server
            .ok(
                Method::PUT,
                &format!("/sessions/{sid}/references/{image}/attributes"),
                Some(json!({ "attributes": r.attributes })),
            )
            .await;
        if start != end {
            server
                .ok(
                    Method::PATCH,
                    &format!("/sessions/{sid}/references/{image}"),
                    Some(json!({ "position": end })),
                )
                .await;
        }
    }
    server.generate(&sid).await.1
}

/// The five equivalence scenes; the first is the basic walkthrough.
pub fn equivalence_scenes() -> Vec<(&'static str, SceneFixture)> {
    let far = Some(Point::new(1150.0, 60.0));
    vec![
        (
            "walkthrough",
            SceneFixture::new(
                json!({
                    "target": "target.png",
                    "references": [
                        { "path": "ref.png", "attributes": ["mouth", "age"], "position": { "x": 760, "y": 430 } }
                    ],
                    "canvas": { "width": 1200, "height": 800 },
                    "backend": "synthetic"
                }),
                &[("target.png", 11), ("ref.png", 12)],
                vec![far],
            ),
        ),
        (
            "local and global mix",
            SceneFixture::new(
                json!({
                    "target": "t.png",
                    "references": [
                        { "path": "a.png", "attributes": ["eyes"], "position": { "x": 520, "y": 300 } },
                        { "path": "b.png", "attributes": ["makeup"], "position": { "x": 900, "y": 650 } }
                    ],
                    "canvas": { "width": 1200, "height": 800 }
                }),
                &[("t.png", 21), ("a.png", 22), ("b.png", 23)],
                vec![None, far],
            ),
        ),
        (
            "overlapping globals",
            SceneFixture::new(
                json!({
                    "target": "t.png",
                    "references": [
                        { "path": "a.png", "attributes": ["age", "faceshape"], "position": { "x": 450, "y": 400 } },
                        { "path": "b.png", "attributes": ["age", "hair"], "position": { "x": 600, "y": 200 } },
                        { "path": "c.png", "attributes": ["headpose"], "position": { "x": 820, "y": 420 } }
                    ],
                    "canvas": { "width": 1200, "height": 800 }
                }),
                &[("t.png", 31), ("a.png", 32), ("b.png", 33), ("c.png", 34)],
                vec![None, None, far],
            ),
        ),
        (
            "weight extremes",
            SceneFixture::new(
                json!({
                    "target": "t.png",
                    "references": [
                        { "path": "near.png", "attributes": ["nose", "mouth"], "position": { "x": 740, "y": 400 } },
                        { "path": "gone.png", "attributes": ["eyes", "makeup"], "position": { "x": 0, "y": 0 } }
                    ],
                    "canvas": { "width": 1200, "height": 800 }
                }),
                &[("t.png", 41), ("near.png", 42), ("gone.png", 43)],
                vec![far, None],
            ),
        ),
        (
            "custom canvas",
            SceneFixture::new(
                json!({
                    "target": "t.png",
                    "references": [
                        { "path": "a.png", "attributes": ["eyes", "nose", "mouth", "hair", "age", "faceshape", "headpose", "makeup"], "position": { "x": 260, "y": 170 } },
                        { "path": "b.png", "attributes": ["hair", "makeup"], "position": { "x": 120, "y": 260 } }
                    ],
                    "canvas": { "width": 600, "height": 400, "d_min": 40, "d_max": 300, "target_radius": 30, "reference_radius": 20 }
                }),
                &[("t.png", 51), ("a.png", 52), ("b.png", 53)],
                vec![Some(Point::new(590.0, 10.0)), None],
            ),
        ),
    ]
}
