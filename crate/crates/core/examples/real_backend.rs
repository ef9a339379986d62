//! Encode and regenerate a face with TorchScript models.
//!
//! ```bash
//! CANVAS_BLEND_ENCODER=encoder.pt CANVAS_BLEND_GENERATOR=generator.pt \
//!     cargo run --example real_backend -- face.png out.png
//! ```

use canvas_blend::backend::{BackendKind, Engine};
use canvas_blend::config::Config;

fn main() {
    let mut args = std::env::args().skip(1);
    let (Some(face), Some(out)) = (args.next(), args.next()) else {
        eprintln!("usage: real_backend <face.png> <out.png>");
        std::process::exit(2);
    };
    let config = Config::load(None).unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(2);
    });
    let engine = match Engine::load(BackendKind::Real, &config.real, config.masks.feather_px) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(3);
        }
    };
    let g = &engine.generator;
    let image = g.prepare(&std::fs::read(&face).unwrap()).unwrap();
    let latent = g.encode(&image).unwrap();
    let shape = latent.shape();
    let result = g.generate(&latent).unwrap();
    std::fs::write(&out, result.to_png().unwrap()).unwrap();
    println!(
        "latent {}x{}, output {:?}, masks from {}",
        shape.layers,
        shape.width,
        result.dims(),
        engine.masks.name()
    );
}
