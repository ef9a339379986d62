//! End-to-end checks of the TorchScript worker with tiny stand-in models.
//! Skipped when python3 cannot import torch.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Duration;

use canvas_blend::api::{self, AppState, JobRecord, JobStatus};
use canvas_blend::attributes::{Attribute, AttributeRegistry, Region};
use canvas_blend::backend::{BackendError, BackendKind, BridgeConfig, Engine};
use canvas_blend::latent::{LatentCode, Weight};
use canvas_blend::raster::Image;
use canvas_blend::store::ImageRef;
use canvas_blend::transfer::{render_result, Contribution, TransferRequest};
use serde_json::json;

const BUILD_MODELS: &str = r#"
import sys, torch
import torch.nn as nn
import torch.nn.functional as F
torch.manual_seed(7)
out = sys.argv[1]

class Encoder(nn.Module):
    def __init__(self):
        super().__init__()
        self.fc = nn.Linear(48, 32)
    def forward(self, x):
        return self.fc(F.adaptive_avg_pool2d(x, 4).flatten(1)).view(-1, 4, 8)

class Generator(nn.Module):
    def __init__(self):
        super().__init__()
        self.fc = nn.Linear(32, 3 * 16 * 16)
    def forward(self, z):
        y = torch.tanh(self.fc(z.flatten(1))).view(-1, 3, 16, 16)
        return F.interpolate(y, size=(64, 64), mode="nearest")

class Parser(nn.Module):
    def __init__(self):
        super().__init__()
        lab = torch.ones(512, 512, dtype=torch.long)
        def box(r0, r1, c0, c1, v):
            lab[int(r0 * 512):int(r1 * 512), int(c0 * 512):int(c1 * 512)] = v
        box(0.0, 0.25, 0.0, 1.0, 17)
        box(0.35, 0.45, 0.2, 0.45, 4)
        box(0.35, 0.45, 0.55, 0.8, 5)
        box(0.47, 0.60, 0.4, 0.6, 10)
        box(0.62, 0.86, 0.3, 0.7, 11)
        self.register_buffer("logits", F.one_hot(lab, 19).permute(2, 0, 1).float().unsqueeze(0))
    def forward(self, x):
        return self.logits + 0.0 * x.mean()

for name, m, ex in [("encoder", Encoder(), torch.zeros(1, 3, 64, 64)),
                    ("generator", Generator(), torch.zeros(1, 4, 8)),
                    ("parser", Parser(), torch.zeros(1, 3, 512, 512))]:
    torch.jit.trace(m.eval(), ex).save(f"{out}/{name}.pt")
"#;

fn build_models(dir: &Path) -> Option<BridgeConfig> {
    let script = dir.join("build.py");
    std::fs::write(&script, BUILD_MODELS).unwrap();
    let ok = Command::new("python3")
        .arg(&script)
        .arg(dir)
        .status()
        .map(|s| s.success())
        .unwrap_or(false);
    if !ok {
        eprintln!("skipping: python3 with torch is not available");
        return None;
    }
    let model = |n: &str| Some(dir.join(format!("{n}.pt")));
    Some(BridgeConfig {
        encoder: model("encoder"),
        generator: model("generator"),
        parser: model("parser"),
        encoder_size: 64,
        ..BridgeConfig::default()
    })
}

fn mean_delta(a: &Image, b: &Image, pick: impl Fn(usize) -> bool) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for p in 0..a.as_slice().len() / 3 {
        if pick(p) {
            for ch in p * 3..p * 3 + 3 {
                sum += f64::from((a.as_slice()[ch] - b.as_slice()[ch]).abs());
            }
            n += 3;
        }
    }
    sum / n.max(1) as f64
}

#[test]
fn worker_round_trip_and_transfers() {
    let dir = tempfile::tempdir().unwrap();
    let Some(config) = build_models(dir.path()) else { return };
    let engine = Engine::load(BackendKind::Real, &config, 5.0).unwrap();
    let g = engine.generator.clone();
    assert_eq!(g.latent_shape().layers, 4);
    assert_eq!(g.output_size(), (64, 64));
    assert_eq!(engine.masks.name(), "parser");

    let face = g.prepare(&common::portrait(1)).unwrap();
    let t = g.encode(&face).unwrap();
    assert_eq!(t, g.encode(&face).unwrap(), "encode is deterministic");
    let plain = g.generate(&t).unwrap();
    assert_eq!(plain, g.generate(&t).unwrap(), "generate is deterministic");

    let r = g.encode(&g.prepare(&common::portrait(2)).unwrap()).unwrap();
    let registry = AttributeRegistry::with_default_groups(4);
    let run = |attribute: Attribute| {
        let mut req = TransferRequest::new(t.clone(), plain.clone());
        req.contributions.push(Contribution {
            reference: ImageRef::for_bytes(b"r"),
            latent: r.clone(),
            spec: registry.get(attribute).clone(),
            weight: Weight::ONE,
        });
        render_result(&req, g.as_ref(), engine.masks.as_ref()).unwrap()
    };

    let masks = engine.masks.masks_for(&plain).unwrap();
    let mouth = &masks[&Region::Mouth];
    // parser labels, not the template, define the region
    assert_eq!(mouth.at(32, 47), 1.0);
    assert_eq!(mouth.at(32, 10), 0.0);
    assert_eq!(masks[&Region::Hair].at(32, 4), 1.0);

    let local = run(Attribute::Mouth);
    let inside = mean_delta(&local, &plain, |p| mouth.alpha()[p] > 0.0);
    let outside = mean_delta(&local, &plain, |p| mouth.alpha()[p] == 0.0);
    assert!(inside > 0.0, "mouth transfer changed nothing");
    assert!(outside < 0.02, "mouth leaked: {outside}");

    let global = run(Attribute::Makeup);
    assert!(mean_delta(&global, &plain, |_| true) > 0.0);
}

#[test]
fn wrong_shape_latent_is_rejected_before_the_worker() {
    let dir = tempfile::tempdir().unwrap();
    let Some(config) = build_models(dir.path()) else { return };
    let engine = Engine::load(BackendKind::Real, &config, 5.0).unwrap();
    let z = LatentCode::zeros(Default::default());
    assert!(matches!(engine.generator.generate(&z), Err(BackendError::Latent(_))));
    // the worker is still usable afterwards
    let ok = LatentCode::zeros(engine.generator.latent_shape());
    engine.generator.generate(&ok).unwrap();
}

#[test]
fn unloadable_model_reports_unavailable() {
    let dir = tempfile::tempdir().unwrap();
    let Some(mut config) = build_models(dir.path()) else { return };
    let junk = dir.path().join("junk.pt");
    std::fs::write(&junk, b"not a model").unwrap();
    config.generator = Some(junk);
    let err = Engine::load(BackendKind::Real, &config, 5.0).unwrap_err();
    assert!(
        matches!(err, BackendError::Unavailable { .. } | BackendError::Failure(_)),
        "{err}"
    );
}

#[tokio::test(flavor = "multi_thread")]
async fn http_generation_is_queued_and_polled() {
    let dir = tempfile::tempdir().unwrap();
    let Some(bridge) = build_models(dir.path()) else { return };
    let engine = Engine::load(BackendKind::Real, &bridge, 5.0).unwrap();
    let mut config = common::test_config(&dir.path().join("data"));
    config.backend = BackendKind::Real;
    let state = AppState::open(&config, engine).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}/v1", listener.local_addr().unwrap());
    tokio::spawn(async move { axum::serve(listener, api::router(state)).await.unwrap() });
    let client = reqwest::Client::new();

    let session: serde_json::Value = client.post(format!("{base}/sessions")).send().await.unwrap().json().await.unwrap();
    let sid = session["session_id"].as_str().unwrap().to_string();
    let up = |bytes: Vec<u8>| {
        let client = client.clone();
        let url = format!("{base}/sessions/{sid}/images");
        async move {
            let v: serde_json::Value = client.post(url).body(bytes).send().await.unwrap().json().await.unwrap();
            v["image"].as_str().unwrap().to_string()
        }
    };
    let target = up(common::portrait(3)).await;
    let reference = up(common::portrait(4)).await;
    let put = |path: String, body: serde_json::Value| client.put(format!("{base}/sessions/{sid}{path}")).json(&body).send();
    assert!(put("/target".into(), json!({ "image": target })).await.unwrap().status().is_success());
    let placed = client
        .post(format!("{base}/sessions/{sid}/references"))
        .json(&json!({ "image": reference, "position": { "x": 700, "y": 400 } }))
        .send()
        .await
        .unwrap();
    assert!(placed.status().is_success());
    assert!(put(format!("/references/{reference}/attributes"), json!({ "attributes": ["mouth", "makeup"] }))
        .await
        .unwrap()
        .status()
        .is_success());

    let resp = client.post(format!("{base}/sessions/{sid}/generate")).send().await.unwrap();
    assert_eq!(resp.status().as_u16(), 202);
    let job: JobRecord = resp.json().await.unwrap();

    let mut done = None;
    for _ in 0..200 {
        let j: JobRecord = client
            .get(format!("{base}/sessions/{sid}/jobs/{}", job.id))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        match j.status {
            JobStatus::Done => {
                done = Some(j);
                break;
            }
            JobStatus::Failed => panic!("job failed: {:?}", j.error),
            _ => tokio::time::sleep(Duration::from_millis(50)).await,
        }
    }
    let done = done.expect("job finished");
    let id = done.history_id.unwrap();
    let png = client
        .get(format!("{base}/sessions/{sid}/history/{id}/image"))
        .send()
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();
    assert_eq!(Image::decode(&png).unwrap().dims(), (64, 64));
}
