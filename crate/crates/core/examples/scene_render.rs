//! Headless rendering of a scene file, the same path the `render`
//! subcommand takes.
//!
//! ```bash
//! cargo run --example scene_render -- out/scene
//! ```

use std::path::PathBuf;

use canvas_blend::backend::{Engine, SyntheticBackend};
use canvas_blend::pipeline::Renderer;
use canvas_blend::scene;
use serde_json::json;

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "example-out/scene".into()));
    std::fs::create_dir_all(&out).unwrap();

    let faces = SyntheticBackend::new();
    for (name, seed) in [("target.png", 10), ("smile.png", 11), ("hair.png", 12)] {
        std::fs::write(out.join(name), faces.portrait_png(seed)).unwrap();
    }
    let spec = json!({
        "target": "target.png",
        "references": [
            { "path": "smile.png", "attributes": ["mouth", "age"], "position": { "x": 760, "y": 430 } },
            { "path": "hair.png", "attributes": ["hair"], "weight": 0.6 }
        ],
        "canvas": { "width": 1200, "height": 800 },
        "backend": "synthetic"
    });
    let spec_path = out.join("scene.json");
    std::fs::write(&spec_path, serde_json::to_vec_pretty(&spec).unwrap()).unwrap();

    let renderer = Renderer::new(Engine::synthetic(5.0), &Default::default());
    let result = out.join("result.png");
    let report = scene::cli_render(&spec_path, &result, &renderer, true).unwrap();
    for r in &report.references {
        println!("{:<10} weight {:.3}", r.path.display(), r.weight);
    }
    for c in &report.contributions {
        println!("  {} ({}) w={:.3}", c.attribute.as_str(), c.mode, c.weight);
    }
    println!("wrote {} and {}", result.display(), scene::report_path(&result).display());
}
