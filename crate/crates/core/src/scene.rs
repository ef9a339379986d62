//! Headless scenes: a JSON file describing a target, references and the
//! canvas, rendered through the same session and transfer pipeline the HTTP
//! service uses.
//!
//! ```json
//! {
//!   "target": "portrait.png",
//!   "references": [
//!     { "path": "a.png", "attributes": ["mouth", "age"], "position": { "x": 700, "y": 400 } },
//!     { "path": "b.png", "attributes": ["hair"], "weight": 0.4 }
//!   ],
//!   "canvas": { "width": 1200, "height": 800 },
//!   "backend": "synthetic"
//! }
//! ```
//!
//! Paths are relative to the scene file. References given a `position` are
//! placed on the canvas and weighted by distance; references given a `weight`
//! bypass the canvas. Positioned references contribute first (in file order),
//! then weighted ones.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attributes::Attribute;
use crate::backend::{BackendError, BackendKind};
use crate::latent::{DistanceModel, LatentError, Weight};
use crate::pipeline::{PipelineError, Renderer};
use crate::raster::Image;
use crate::session::{
    CanvasGeometry, CanvasState, PlannedContribution, Point, SessionDocument, SessionError,
};
use crate::store::{ImageRef, ImageStore};
use crate::transfer::{AppliedContribution, TransferError};

pub const SCENE_SCHEMA: &str = include_str!("../schema/scene.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneCanvas {
    pub width: f64,
    pub height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_radius: Option<f64>,
}

impl SceneCanvas {
    pub fn geometry(&self) -> CanvasGeometry {
        let defaults = CanvasGeometry::default();
        CanvasGeometry {
            width: self.width,
            height: self.height,
            target_radius: self.target_radius.unwrap_or(defaults.target_radius),
            reference_radius: self.reference_radius.unwrap_or(defaults.reference_radius),
        }
    }

    /// Explicit bounds override the geometry-derived defaults one by one.
    pub fn distance_model(&self) -> Result<DistanceModel, LatentError> {
        let geometry = self.geometry();
        let defaults = geometry.default_distance_model();
        let d_min = match self.d_min {
            Some(v) => v,
            None => geometry.target_radius + geometry.reference_radius,
        };
        let d_max = match self.d_max {
            Some(v) => v,
            None => defaults.map_or(geometry.width.hypot(geometry.height) / 2.0, |m| m.d_max),
        };
        DistanceModel::new(d_min, d_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneReference {
    pub path: PathBuf,
    #[serde(default)]
    pub attributes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub target: PathBuf,
    #[serde(default)]
    pub references: Vec<SceneReference>,
    pub canvas: SceneCanvas,
    #[serde(default)]
    pub backend: BackendKind,
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("reference {index}: {message}")]
    Reference { index: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("output {0} exists (pass --force to overwrite)")]
    OutputExists(PathBuf),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Process exit codes for `render`.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const BACKEND: i32 = 3;
    pub const OUTPUT_EXISTS: i32 = 4;
}

fn backend_side(e: &BackendError) -> bool {
    !matches!(e, BackendError::InvalidInput(_))
}

impl SceneError {
    pub fn exit_code(&self) -> i32 {
        match self {
            SceneError::Invalid(_) | SceneError::Reference { .. } => exit::VALIDATION,
            SceneError::Read { .. } | SceneError::Write { .. } => exit::IO,
            SceneError::OutputExists(_) => exit::OUTPUT_EXISTS,
            SceneError::Session(SessionError::Backend(e)) => {
                if backend_side(e) {
                    exit::BACKEND
                } else {
                    exit::VALIDATION
                }
            }
            SceneError::Session(_) => exit::VALIDATION,
            SceneError::Pipeline(p) => match p {
                PipelineError::Io(_) => exit::IO,
                PipelineError::Backend(e) | PipelineError::Session(SessionError::Backend(e)) => {
                    if backend_side(e) {
                        exit::BACKEND
                    } else {
                        exit::VALIDATION
                    }
                }
                PipelineError::Session(_) => exit::VALIDATION,
                PipelineError::Transfer(TransferError::Generation(e)) if !backend_side(e) => {
                    exit::VALIDATION
                }
                PipelineError::Transfer(_) => exit::BACKEND,
            },
        }
    }
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let spec: SceneSpec =
            serde_json::from_str(text).map_err(|e| SceneError::Invalid(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self, SceneError> {
        let text = fs::read_to_string(path).map_err(|source| SceneError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        self.canvas
            .distance_model()
            .map_err(|e| SceneError::Invalid(format!("canvas: {e}")))?;
        let g = self.canvas.geometry();
        if !(g.width.is_finite() && g.height.is_finite() && g.width > 0.0 && g.height > 0.0) {
            return Err(SceneError::Invalid(
                "canvas width and height must be positive".into(),
            ));
        }
        for (index, r) in self.references.iter().enumerate() {
            let bad = |message: String| SceneError::Reference { index, message };
            match (&r.position, r.weight) {
                (Some(_), Some(_)) => {
                    return Err(bad("position and weight are mutually exclusive".into()))
                }
                (None, None) => return Err(bad("needs a position or a weight".into())),
                (None, Some(w)) => {
                    Weight::new(w).map_err(|e| bad(e.to_string()))?;
                }
                (Some(p), None) => {
                    if !p.x.is_finite() || !p.y.is_finite() {
                        return Err(bad("position must be finite".into()));
                    }
                }
            }
            Attribute::parse_all(&r.attributes)
                .map_err(|names| bad(format!("unknown attributes: {}", names.join(", "))))?;
        }
        Ok(())
    }

    /// True when every reference is positioned, i.e. the scene can be
    /// replayed through the HTTP API.
    pub fn is_canvas_only(&self) -> bool {
        self.references.iter().all(|r| r.position.is_some())
    }
}

/// Per-reference weight as the pipeline saw it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceWeight {
    pub path: PathBuf,
    pub image: ImageRef,
    pub weight: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderReport {
    pub backend: String,
    pub mask_provider: String,
    pub image_size: (u32, u32),
    pub target: ImageRef,
    pub distance_model: DistanceModel,
    pub references: Vec<ReferenceWeight>,
    pub contributions: Vec<AppliedContribution>,
    pub mask_regions: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SceneOutput {
    pub image: Image,
    pub png: Vec<u8>,
    pub report: RenderReport,
}

fn read(base: &Path, rel: &Path) -> Result<Vec<u8>, SceneError> {
    let path = base.join(rel);
    fs::read(&path).map_err(|source| SceneError::Read { path, source })
}

/// Renders a validated scene; `base` resolves relative paths.
pub fn render_scene(
    spec: &SceneSpec,
    base: &Path,
    renderer: &Renderer,
) -> Result<SceneOutput, SceneError> {
    spec.validate()?;
    let scratch = tempfile::tempdir().map_err(|source| SceneError::Write {
        path: std::env::temp_dir(),
        source,
    })?;
    let store = ImageStore::open(scratch.path()).map_err(|source| SceneError::Write {
        path: scratch.path().to_path_buf(),
        source,
    })?;
    let put = |bytes: &[u8]| {
        store.put(bytes).map_err(|source| SceneError::Write {
            path: store.root().to_path_buf(),
            source,
        })
    };

    let model = spec
        .canvas
        .distance_model()
        .map_err(|e| SceneError::Invalid(e.to_string()))?;
    let mut doc = SessionDocument::new("scene", CanvasState::new(spec.canvas.geometry(), model)?);

    let target = put(&read(base, &spec.target)?)?;
    renderer
        .check_decodable(&store, &target)
        .map_err(SessionError::from)?;
    doc.set_target(target.clone())?;

    let mut refs = Vec::with_capacity(spec.references.len());
    for (index, r) in spec.references.iter().enumerate() {
        let image = put(&read(base, &r.path)?)?;
        if refs.iter().any(|(_, i): &(usize, ImageRef)| *i == image) || image == target {
            return Err(SceneError::Reference {
                index,
                message: format!("{} duplicates another image in the scene", r.path.display()),
            });
        }
        renderer
            .check_decodable(&store, &image)
            .map_err(SessionError::from)?;
        if let Some(p) = r.position {
            doc.place_reference(image.clone(), p)?;
            doc.select_attributes(&image, &r.attributes)?;
        }
        refs.push((index, image));
    }

    let mut plan = doc.transfer_plan()?;
    let state = doc.current();
    let mut references = Vec::new();
    for (index, image) in &refs {
        let r = &spec.references[*index];
        let (weight, distance) = match state.placement(image) {
            Some(p) => (state.weight_of(p), Some(state.distance_of(p))),
            None => (Weight::new(r.weight.expect("validated")).expect("validated"), None),
        };
        references.push(ReferenceWeight {
            path: r.path.clone(),
            image: image.clone(),
            weight: weight.value(),
            distance,
        });
        if r.position.is_none() && !weight.is_zero() {
            let mut attrs = Attribute::parse_all(&r.attributes).expect("validated");
            attrs.sort();
            attrs.dedup();
            plan.contributions.extend(attrs.into_iter().map(|attribute| PlannedContribution {
                reference: image.clone(),
                attribute,
                weight,
            }));
        }
    }

    let req = renderer.request(&plan, &store)?;
    let image = renderer.render(&req)?;
    let png = image
        .to_png()
        .map_err(|e| PipelineError::Backend(BackendError::Failure(e.to_string())))?;
    let contributions = req.applied();
    let mut mask_regions: Vec<String> = contributions
        .iter()
        .filter_map(|c| c.region.map(|r| r.to_string()))
        .collect();
    mask_regions.dedup();
    let engine = renderer.engine();
    Ok(SceneOutput {
        report: RenderReport {
            backend: engine.generator.name().to_string(),
            mask_provider: engine.masks.name().to_string(),
            image_size: image.dims(),
            target,
            distance_model: model,
            references,
            contributions,
            mask_regions,
        },
        image,
        png,
    })
}

/// Where the report for `out` is written: `result.png` → `result.report.json`.
pub fn report_path(out: &Path) -> PathBuf {
    out.with_extension("report.json")
}

/// Renders the scene at `spec_path` into `out` (PNG) plus a JSON report.
/// Existing outputs are kept unless `force` is set.
pub fn cli_render(
    spec_path: &Path,
    out: &Path,
    renderer: &Renderer,
    force: bool,
) -> Result<RenderReport, SceneError> {
    let spec = SceneSpec::from_file(spec_path)?;
    let report_out = report_path(out);
    if !force {
        for p in [out, report_out.as_path()] {
            if p.exists() {
                return Err(SceneError::OutputExists(p.to_path_buf()));
            }
        }
    }
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let output = render_scene(&spec, base, renderer)?;
    let write = |path: &Path, bytes: &[u8]| {
        fs::write(path, bytes).map_err(|source| SceneError::Write {
            path: path.to_path_buf(),
            source,
        })
    };
    write(out, &output.png)?;
    let json = serde_json::to_vec_pretty(&output.report).expect("report serializes");
    write(&report_out, &json)?;
    Ok(output.report)
}
