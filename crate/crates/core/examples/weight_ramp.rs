//! How canvas distance turns into influence, and how the connection line
//! looks at each step.
//!
//! ```bash
//! cargo run --example weight_ramp
//! ```

use canvas_blend::latent::distance_to_weight;
use canvas_blend::session::{CanvasGeometry, LineStyle};

fn main() {
    let canvas = CanvasGeometry::default();
    let model = canvas.default_distance_model().unwrap();
    println!(
        "canvas {}x{}, d_min {:.1}, d_max {:.1}",
        canvas.width, canvas.height, model.d_min, model.d_max
    );
    println!("{:>8}  {:>6}  {:>9}  color", "distance", "weight", "thickness");
    for step in 0..=10 {
        let d = model.d_max * f64::from(step) / 10.0;
        let w = distance_to_weight(d, &model).unwrap();
        let line = LineStyle::for_weight(w);
        println!("{d:>8.1}  {:>6.3}  {:>9.2}  {}", w.value(), line.thickness, line.color);
    }
}
