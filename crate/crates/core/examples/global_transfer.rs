//! Global attributes (age, face shape, head pose, makeup) at increasing
//! weights, rendered with the synthetic backend.
//!
//! ```bash
//! cargo run --example global_transfer -- out/global
//! ```

use std::path::PathBuf;

use canvas_blend::attributes::{Attribute, AttributeRegistry};
use canvas_blend::backend::{GeneratorBackend, SyntheticBackend};
use canvas_blend::latent::Weight;
use canvas_blend::transfer::transfer_global;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "example-out/global".into()));
    std::fs::create_dir_all(&out).unwrap();

    let backend = SyntheticBackend::new();
    let registry = AttributeRegistry::with_default_groups(backend.latent_shape().layers);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let target = backend.sample_latent(&mut rng);
    let reference = backend.sample_latent(&mut rng);

    for attribute in [Attribute::Age, Attribute::FaceShape, Attribute::HeadPose, Attribute::Makeup] {
        let spec = registry.get(attribute);
        for w in [0.0, 0.5, 1.0] {
            let z = transfer_global(&target, &reference, spec, Weight::new(w).unwrap()).unwrap();
            let path = out.join(format!("{}-{w:.1}.png", attribute.as_str()));
            std::fs::write(&path, backend.generate(&z).unwrap().to_png().unwrap()).unwrap();
            println!("{}", path.display());
        }
    }
}
