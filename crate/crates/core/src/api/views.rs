use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::attributes::Attribute;
use crate::latent::DistanceModel;
use crate::session::{CanvasGeometry, HistoryEntry, LineStyle, Point, SessionDocument};
use crate::store::ImageRef;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetView {
    pub image: ImageRef,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementView {
    pub image: ImageRef,
    pub position: Point,
    pub attributes: Vec<Attribute>,
    pub distance: f64,
    pub weight: f64,
    /// Weight per selected attribute.
    pub weights: BTreeMap<Attribute, f64>,
    pub line: LineStyle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryView {
    pub id: u64,
    pub result_image: ImageRef,
    pub created_at: DateTime<Utc>,
    pub fingerprint: String,
}

impl From<&HistoryEntry> for HistoryView {
    fn from(e: &HistoryEntry) -> Self {
        Self {
            id: e.id(),
            result_image: e.result_image().clone(),
            created_at: e.created_at(),
            fingerprint: e.fingerprint(),
        }
    }
}

/// Everything the UI needs to draw the workspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub canvas: CanvasGeometry,
    pub distance_model: DistanceModel,
    pub target: Option<TargetView>,
    pub placements: Vec<PlacementView>,
    pub undo_depth: usize,
    pub redo_depth: usize,
    pub history: Vec<HistoryView>,
}

impl From<&SessionDocument> for SessionView {
    fn from(doc: &SessionDocument) -> Self {
        let state = doc.current();
        let placements = state
            .placements
            .iter()
            .map(|p| {
                let weight = state.weight_of(p);
                PlacementView {
                    image: p.image.clone(),
                    position: p.position,
                    attributes: p.attributes.iter().copied().collect(),
                    distance: state.distance_of(p),
                    weight: weight.value(),
                    weights: p.attributes.iter().map(|&a| (a, weight.value())).collect(),
                    line: LineStyle::for_weight(weight),
                }
            })
            .collect();
        Self {
            session_id: doc.session_id.clone(),
            canvas: state.canvas,
            distance_model: state.distance_model,
            target: state.target.clone().map(|image| TargetView {
                image,
                position: state.target_position(),
            }),
            placements,
            undo_depth: doc.undo_depth(),
            redo_depth: doc.redo_depth(),
            history: doc.history().iter().map(HistoryView::from).collect(),
        }
    }
}
