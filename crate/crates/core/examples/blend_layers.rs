//! Layer-restricted blending of two latents, per attribute layer group.
//!
//! ```bash
//! cargo run --example blend_layers
//! ```

use canvas_blend::attributes::AttributeRegistry;
use canvas_blend::latent::{blend_layers, LatentCode, LatentShape, Weight};

fn main() {
    let shape = LatentShape::default();
    let target = LatentCode::filled(shape, 0.0).unwrap();
    let reference = LatentCode::filled(shape, 1.0).unwrap();
    let registry = AttributeRegistry::with_default_groups(shape.layers);

    println!("{} layers; each row shows layer means after blending at w=0.5\n", shape.layers);
    for spec in registry.iter() {
        let out = blend_layers(&target, &reference, spec.layers(), Weight::new(0.5).unwrap()).unwrap();
        let row: String = (0..shape.layers)
            .map(|l| {
                let mean = out.layer(l).iter().sum::<f32>() / shape.width as f32;
                if mean == 0.0 { '.' } else { '#' }
            })
            .collect();
        let mode = if spec.is_global() { "global" } else { "local" };
        println!("{:<10} {:<6} {row}", spec.attribute.as_str(), mode);
    }
}
