//! Generate a few results, then restore an earlier history point and
//! regenerate it bit-identically.
//!
//! ```bash
//! cargo run --example history_restore
//! ```

use canvas_blend::backend::{Engine, SyntheticBackend};
use canvas_blend::pipeline::Renderer;
use canvas_blend::session::{CanvasGeometry, Point, SessionDocument};
use canvas_blend::store::ImageStore;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let store = ImageStore::open(dir.path()).unwrap();
    let renderer = Renderer::new(Engine::synthetic(5.0), &Default::default());
    let faces = SyntheticBackend::new();
    let target = store.put(&faces.portrait_png(1)).unwrap();
    let reference = store.put(&faces.portrait_png(2)).unwrap();

    let mut doc = SessionDocument::with_geometry(CanvasGeometry::default()).unwrap();
    doc.set_target(target).unwrap();
    doc.place_reference(reference.clone(), Point::new(1000.0, 600.0)).unwrap();
    doc.select_attributes(&reference, &["eyes", "makeup"]).unwrap();

    for x in [1000.0, 850.0, 700.0] {
        doc.move_reference(&reference, Point::new(x, 420.0)).unwrap();
        let png = renderer.render_plan_png(&doc.transfer_plan().unwrap(), &store).unwrap();
        let entry = doc.commit_generation(store.put(&png).unwrap());
        println!("history #{} -> {} ({})", entry.id(), &entry.result_image().as_str()[..12], &entry.fingerprint()[..12]);
    }

    doc.restore_history(1).unwrap();
    let again = renderer.render_plan_png(&doc.transfer_plan().unwrap(), &store).unwrap();
    let stored = store.get(doc.history_entry(1).unwrap().result_image()).unwrap();
    println!("restored #1, regenerated identical: {}", again == stored);
    doc.undo();
    println!("undo restore, reference at x={}", doc.current().placements[0].position.x);
}
