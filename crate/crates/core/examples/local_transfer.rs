//! Local attributes composited through feathered region masks; pixels
//! outside the mask stay untouched.
//!
//! ```bash
//! cargo run --example local_transfer -- out/local
//! ```

use std::path::PathBuf;

use canvas_blend::attributes::{Attribute, AttributeRegistry};
use canvas_blend::backend::{GeneratorBackend, MaskProvider, SyntheticBackend, TemplateMasks};
use canvas_blend::latent::Weight;
use canvas_blend::raster::Image;
use canvas_blend::store::ImageRef;
use canvas_blend::transfer::{render_result, Contribution, TransferRequest};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "example-out/local".into()));
    std::fs::create_dir_all(&out).unwrap();

    let backend = SyntheticBackend::new();
    let masks = TemplateMasks::new(5.0);
    let registry = AttributeRegistry::with_default_groups(backend.latent_shape().layers);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let target = backend.sample_latent(&mut rng);
    let reference = backend.sample_latent(&mut rng);
    let plain = backend.generate(&target).unwrap();
    let regions = masks.masks_for(&plain).unwrap();

    for attribute in [Attribute::Eyes, Attribute::Nose, Attribute::Mouth, Attribute::Hair] {
        let mut req = TransferRequest::new(target.clone(), plain.clone());
        req.contributions.push(Contribution {
            reference: ImageRef::for_bytes(b"reference"),
            latent: reference.clone(),
            spec: registry.get(attribute).clone(),
            weight: Weight::ONE,
        });
        let result = render_result(&req, &backend, &masks).unwrap();

        let mask = &regions[&attribute.region().unwrap()];
        let (w, h) = mask.dims();
        let grey: Vec<f32> = mask.alpha().iter().flat_map(|&a| [a; 3]).collect();
        let changed = (0..result.as_slice().len() / 3)
            .filter(|&p| result.as_slice()[p * 3..p * 3 + 3] != plain.as_slice()[p * 3..p * 3 + 3])
            .count();
        std::fs::write(out.join(format!("{}.png", attribute.as_str())), result.to_png().unwrap()).unwrap();
        std::fs::write(
            out.join(format!("{}-mask.png", attribute.as_str())),
            Image::new(w, h, grey).unwrap().to_png().unwrap(),
        )
        .unwrap();
        println!(
            "{:<6} mask support {:>5} px, changed {:>5} px",
            attribute.as_str(),
            mask.support(),
            changed
        );
    }
    println!("wrote {}", out.display());
}
