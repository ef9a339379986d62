//! The canvas workspace: a centred target, reference cards placed around it,
//! per-card attribute selections, and undo/redo/reset plus a generation
//! history that can be restored.
//!
//! Every successful edit pushes the previous [`CanvasState`] onto the undo
//! stack and clears the redo stack. Failed edits leave the document
//! untouched. Weights are never stored: they are derived from geometry each
//! time they are read.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::attributes::{Attribute, AttributeRegistry};
use crate::backend::BackendError;
use crate::latent::{distance_to_weight, DistanceModel, LatentCode, LatentError, Weight};
use crate::raster::Image;
use crate::store::ImageRef;
use crate::transfer::{Contribution, TransferRequest};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no target image has been set")]
    NoTarget,
    #[error("image {0} is already placed on the canvas")]
    Duplicate(ImageRef),
    #[error("image {0} is not placed on the canvas")]
    NotFound(ImageRef),
    #[error("unknown attributes: {}", .0.join(", "))]
    UnknownAttributes(Vec<String>),
    #[error("no history entry with id {0}")]
    HistoryNotFound(u64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Latent(#[from] LatentError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Canvas extent and card sizes, in canvas units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CanvasGeometry {
    pub width: f64,
    pub height: f64,
    pub target_radius: f64,
    pub reference_radius: f64,
}

impl Default for CanvasGeometry {
    fn default() -> Self {
        Self {
            width: 1200.0,
            height: 800.0,
            target_radius: 80.0,
            reference_radius: 60.0,
        }
    }
}

impl CanvasGeometry {
    pub fn center(&self) -> Point {
        Point::new(self.width / 2.0, self.height / 2.0)
    }

    /// Weight 1 when the cards touch, 0 at half the canvas diagonal.
    pub fn default_distance_model(&self) -> Result<DistanceModel, LatentError> {
        DistanceModel::new(
            self.target_radius + self.reference_radius,
            self.width.hypot(self.height) / 2.0,
        )
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height))
    }

    fn validate(&self) -> Result<(), SessionError> {
        let dims_ok = self.width.is_finite()
            && self.height.is_finite()
            && self.width > 0.0
            && self.height > 0.0;
        let radii_ok = self.target_radius.is_finite()
            && self.reference_radius.is_finite()
            && self.target_radius >= 0.0
            && self.reference_radius >= 0.0;
        if dims_ok && radii_ok {
            Ok(())
        } else {
            Err(SessionError::InvalidInput(format!(
                "bad canvas geometry {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePlacement {
    pub image: ImageRef,
    pub position: Point,
    pub attributes: BTreeSet<Attribute>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanvasState {
    pub canvas: CanvasGeometry,
    pub target: Option<ImageRef>,
    pub placements: Vec<ReferencePlacement>,
    pub distance_model: DistanceModel,
}

impl CanvasState {
    pub fn new(canvas: CanvasGeometry, distance_model: DistanceModel) -> Result<Self, SessionError> {
        canvas.validate()?;
        distance_model.validate()?;
        Ok(Self {
            canvas,
            target: None,
            placements: Vec::new(),
            distance_model,
        })
    }

    pub fn target_position(&self) -> Point {
        self.canvas.center()
    }

    pub fn placement(&self, image: &ImageRef) -> Option<&ReferencePlacement> {
        self.placements.iter().find(|p| &p.image == image)
    }

    fn placement_mut(&mut self, image: &ImageRef) -> Result<&mut ReferencePlacement, SessionError> {
        self.placements
            .iter_mut()
            .find(|p| &p.image == image)
            .ok_or_else(|| SessionError::NotFound(image.clone()))
    }

    pub fn distance_of(&self, placement: &ReferencePlacement) -> f64 {
        placement.position.distance(self.target_position())
    }

    /// Derived influence of a placement; shared by all its attributes.
    pub fn weight_of(&self, placement: &ReferencePlacement) -> Weight {
        distance_to_weight(self.distance_of(placement), &self.distance_model)
            .expect("model validated and distances are finite")
    }

    pub fn preview_weight(&self, position: Point) -> Weight {
        let d = self.canvas.clamp(position).distance(self.target_position());
        distance_to_weight(d, &self.distance_model).expect("model validated")
    }

    /// One entry per (placement, selected attribute) with non-zero weight,
    /// in placement order then canonical attribute order.
    pub fn transfer_plan(&self) -> Result<TransferPlan, SessionError> {
        let target = self.target.clone().ok_or(SessionError::NoTarget)?;
        let mut contributions = Vec::new();
        for p in &self.placements {
            let weight = self.weight_of(p);
            if weight.is_zero() {
                continue;
            }
            for &attribute in &p.attributes {
                contributions.push(PlannedContribution {
                    reference: p.image.clone(),
                    attribute,
                    weight,
                });
            }
        }
        Ok(TransferPlan {
            target,
            contributions,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannedContribution {
    pub reference: ImageRef,
    pub attribute: Attribute,
    pub weight: Weight,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferPlan {
    pub target: ImageRef,
    pub contributions: Vec<PlannedContribution>,
}

/// Supplies backend-resolution images and their latents by reference.
pub trait LatentSource {
    fn image(&self, image: &ImageRef) -> Result<Image, BackendError>;

    fn latent(&self, image: &ImageRef) -> Result<LatentCode, BackendError>;
}

impl TransferPlan {
    pub fn resolve<S: LatentSource + ?Sized>(
        &self,
        source: &S,
        registry: &AttributeRegistry,
    ) -> Result<TransferRequest, SessionError> {
        let mut req = TransferRequest::new(source.latent(&self.target)?, source.image(&self.target)?);
        for c in &self.contributions {
            req.contributions.push(Contribution {
                reference: c.reference.clone(),
                latent: source.latent(&c.reference)?,
                spec: registry.get(c.attribute).clone(),
                weight: c.weight,
            });
        }
        Ok(req)
    }
}

/// Immutable snapshot of a workspace and the image generated from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    id: u64,
    state: CanvasState,
    result_image: ImageRef,
    created_at: DateTime<Utc>,
}

impl HistoryEntry {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn state(&self) -> &CanvasState {
        &self.state
    }

    pub fn result_image(&self) -> &ImageRef {
        &self.result_image
    }

    pub fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }

    /// SHA-256 over the snapshot and result reference.
    pub fn fingerprint(&self) -> String {
        let body = serde_json::to_vec(&(&self.state, &self.result_image))
            .expect("canvas state serializes");
        hex::encode(Sha256::digest(body))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDocument {
    pub session_id: String,
    current: CanvasState,
    undo_stack: Vec<CanvasState>,
    redo_stack: Vec<CanvasState>,
    history: Vec<HistoryEntry>,
}

impl SessionDocument {
    pub fn new(session_id: impl Into<String>, initial: CanvasState) -> Self {
        Self {
            session_id: session_id.into(),
            current: initial,
            undo_stack: Vec::new(),
            redo_stack: Vec::new(),
            history: Vec::new(),
        }
    }

    /// A session with a random id and default geometry.
    pub fn with_geometry(canvas: CanvasGeometry) -> Result<Self, SessionError> {
        let model = canvas.default_distance_model()?;
        Ok(Self::new(
            uuid::Uuid::new_v4().to_string(),
            CanvasState::new(canvas, model)?,
        ))
    }

    pub fn current(&self) -> &CanvasState {
        &self.current
    }

    pub fn undo_depth(&self) -> usize {
        self.undo_stack.len()
    }

    pub fn redo_depth(&self) -> usize {
        self.redo_stack.len()
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn history_entry(&self, id: u64) -> Option<&HistoryEntry> {
        self.history.iter().find(|e| e.id == id)
    }

    fn edit(
        &mut self,
        f: impl FnOnce(&mut CanvasState) -> Result<(), SessionError>,
    ) -> Result<&CanvasState, SessionError> {
        let mut next = self.current.clone();
        f(&mut next)?;
        let prev = std::mem::replace(&mut self.current, next);
        self.undo_stack.push(prev);
        self.redo_stack.clear();
        Ok(&self.current)
    }

    fn checked_point(&self, p: Point) -> Result<Point, SessionError> {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(SessionError::InvalidInput(format!(
                "position ({}, {}) is not finite",
                p.x, p.y
            )));
        }
        Ok(self.current.canvas.clamp(p))
    }

    /// Callers check that `image` decodes before setting it.
    pub fn set_target(&mut self, image: ImageRef) -> Result<&CanvasState, SessionError> {
        self.edit(|s| {
            s.target = Some(image);
            Ok(())
        })
    }

    /// Out-of-bounds positions are clamped onto the canvas.
    pub fn place_reference(
        &mut self,
        image: ImageRef,
        position: Point,
    ) -> Result<&CanvasState, SessionError> {
        let position = self.checked_point(position)?;
        self.edit(|s| {
            if s.target.is_none() {
                return Err(SessionError::NoTarget);
            }
            if s.placement(&image).is_some() {
                return Err(SessionError::Duplicate(image));
            }
            s.placements.push(ReferencePlacement {
                image,
                position,
                attributes: BTreeSet::new(),
            });
            Ok(())
        })
    }

    /// One call per completed drag.
    pub fn move_reference(
        &mut self,
        image: &ImageRef,
        position: Point,
    ) -> Result<&CanvasState, SessionError> {
        let position = self.checked_point(position)?;
        self.edit(|s| {
            s.placement_mut(image)?.position = position;
            Ok(())
        })
    }

    /// Replaces the placement's selection wholesale.
    pub fn select_attributes<S: AsRef<str>>(
        &mut self,
        image: &ImageRef,
        names: &[S],
    ) -> Result<&CanvasState, SessionError> {
        let attributes = Attribute::parse_all(names).map_err(SessionError::UnknownAttributes)?;
        self.edit(|s| {
            s.placement_mut(image)?.attributes = attributes.into_iter().collect();
            Ok(())
        })
    }

    pub fn remove_reference(&mut self, image: &ImageRef) -> Result<&CanvasState, SessionError> {
        self.edit(|s| {
            let before = s.placements.len();
            s.placements.retain(|p| &p.image != image);
            if s.placements.len() == before {
                return Err(SessionError::NotFound(image.clone()));
            }
            Ok(())
        })
    }

    /// Clears every placement, keeping the target. Undoable.
    pub fn reset(&mut self) -> Result<&CanvasState, SessionError> {
        self.edit(|s| {
            s.placements.clear();
            Ok(())
        })
    }

    /// Returns false when there is nothing to undo.
    pub fn undo(&mut self) -> bool {
        match self.undo_stack.pop() {
            Some(prev) => {
                let cur = std::mem::replace(&mut self.current, prev);
                self.redo_stack.push(cur);
                true
            }
            None => false,
        }
    }

    pub fn redo(&mut self) -> bool {
        match self.redo_stack.pop() {
            Some(next) => {
                let cur = std::mem::replace(&mut self.current, next);
                self.undo_stack.push(cur);
                true
            }
            None => false,
        }
    }

    pub fn transfer_plan(&self) -> Result<TransferPlan, SessionError> {
        self.current.transfer_plan()
    }

    pub fn build_transfer_request<S: LatentSource + ?Sized>(
        &self,
        source: &S,
        registry: &AttributeRegistry,
    ) -> Result<TransferRequest, SessionError> {
        self.transfer_plan()?.resolve(source, registry)
    }

    /// Records `result_image` as generated from the current state.
    pub fn commit_generation(&mut self, result_image: ImageRef) -> &HistoryEntry {
        let state = self.current.clone();
        self.commit_snapshot(state, result_image)
    }

    /// Records a result generated from `state`, which may since have been
    /// edited away from.
    pub fn commit_snapshot(&mut self, state: CanvasState, result_image: ImageRef) -> &HistoryEntry {
        let id = self.history.last().map_or(1, |e| e.id + 1);
        self.history.push(HistoryEntry {
            id,
            state,
            result_image,
            created_at: Utc::now(),
        });
        self.history.last().expect("just pushed")
    }

    /// Replaces the current state with the entry's snapshot. Undoable.
    pub fn restore_history(&mut self, id: u64) -> Result<&CanvasState, SessionError> {
        let snapshot = self
            .history_entry(id)
            .ok_or(SessionError::HistoryNotFound(id))?
            .state
            .clone();
        self.edit(|s| {
            *s = snapshot;
            Ok(())
        })
    }
}

/// Connection-line styling for a weight: thickness `1 + 5w`, colour from
/// grey at 0 to the accent at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineStyle {
    pub thickness: f64,
    pub color: String,
}

pub const LINE_IDLE_RGB: [u8; 3] = [0x9e, 0x9e, 0x9e];
pub const LINE_ACCENT_RGB: [u8; 3] = [0xe8, 0x5d, 0x04];

impl LineStyle {
    pub fn for_weight(w: Weight) -> Self {
        let w = w.value();
        let mix = |a: u8, b: u8| (f64::from(a) + w * (f64::from(b) - f64::from(a))).round() as u8;
        let [r, g, b] = [0, 1, 2].map(|i| mix(LINE_IDLE_RGB[i], LINE_ACCENT_RGB[i]));
        Self {
            thickness: 1.0 + 5.0 * w,
            color: format!("#{r:02x}{g:02x}{b:02x}"),
        }
    }
}
