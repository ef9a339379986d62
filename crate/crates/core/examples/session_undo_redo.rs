//! A canvas session driven directly: place, select, drag, undo, redo, reset.
//!
//! ```bash
//! cargo run --example session_undo_redo
//! ```

use canvas_blend::session::{CanvasGeometry, Point, SessionDocument};
use canvas_blend::store::ImageRef;

fn show(label: &str, doc: &SessionDocument) {
    let s = doc.current();
    let cards: Vec<String> = s
        .placements
        .iter()
        .map(|p| {
            let attrs: Vec<&str> = p.attributes.iter().map(|a| a.as_str()).collect();
            format!("{}..@({:.0},{:.0}) w={:.2} [{}]", &p.image.as_str()[..6], p.position.x, p.position.y, s.weight_of(p).value(), attrs.join(","))
        })
        .collect();
    println!("{label:<22} undo={} redo={}  {}", doc.undo_depth(), doc.redo_depth(), cards.join("  "));
}

fn main() {
    let mut doc = SessionDocument::with_geometry(CanvasGeometry::default()).unwrap();
    let target = ImageRef::for_bytes(b"target");
    let a = ImageRef::for_bytes(b"reference a");
    let b = ImageRef::for_bytes(b"reference b");

    doc.set_target(target).unwrap();
    doc.place_reference(a.clone(), Point::new(900.0, 400.0)).unwrap();
    doc.select_attributes(&a, &["mouth", "age"]).unwrap();
    show("place + select a", &doc);
    doc.move_reference(&a, Point::new(700.0, 420.0)).unwrap();
    show("drag a closer", &doc);
    doc.place_reference(b.clone(), Point::new(200.0, 150.0)).unwrap();
    doc.select_attributes(&b, &["hair"]).unwrap();
    show("place b", &doc);

    if let Err(e) = doc.select_attributes(&b, &["hair", "glasses"]) {
        println!("{:<22} {e}", "rejected edit");
    }
    doc.undo();
    show("undo", &doc);
    doc.undo();
    show("undo", &doc);
    doc.redo();
    show("redo", &doc);
    doc.reset().unwrap();
    show("reset", &doc);
    doc.undo();
    show("undo reset", &doc);

    let plan = doc.transfer_plan().unwrap();
    for c in &plan.contributions {
        println!("plan: {} {:.3}", c.attribute.as_str(), c.weight.value());
    }
}
