//! Encoder/generator backends and face-region mask providers.

mod bridge;
mod masks;
mod synthetic;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::latent::{LatentCode, LatentError, LatentShape};
use crate::raster::{Image, RasterError};

pub use bridge::{BridgeConfig, TorchBridge};
pub use masks::{
    FaceParser, LabelMap, MaskError, MaskProvider, MaskSet, ParserMasks, TemplateMasks,
};
pub use synthetic::SyntheticBackend;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend unavailable: {reason} (hint: {hint})")]
    Unavailable { reason: String, hint: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Latent(#[from] LatentError),
    #[error("backend failure: {0}")]
    Failure(String),
}

impl From<RasterError> for BackendError {
    fn from(e: RasterError) -> Self {
        BackendError::InvalidInput(e.to_string())
    }
}

/// An encoder/generator pair that maps images to latents and back.
pub trait GeneratorBackend: Send + Sync {
    fn name(&self) -> &str;

    fn latent_shape(&self) -> LatentShape;

    /// `(width, height)` of generated images.
    fn output_size(&self) -> (u32, u32);

    /// Identical inputs give bit-identical outputs.
    fn is_deterministic(&self) -> bool;

    /// `encode`/`generate` may be called concurrently.
    fn is_reentrant(&self) -> bool;

    fn encode(&self, image: &Image) -> Result<LatentCode, BackendError>;

    /// Renders a latent; channels of the returned image are in `[0, 1]`.
    fn generate(&self, latent: &LatentCode) -> Result<Image, BackendError>;

    /// Decodes uploaded bytes and brings them to the backend resolution.
    fn prepare(&self, bytes: &[u8]) -> Result<Image, BackendError> {
        Ok(Image::decode_resized(bytes, self.output_size())?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Synthetic,
    Real,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "synthetic" => Ok(BackendKind::Synthetic),
            "real" => Ok(BackendKind::Real),
            other => Err(format!(
                "unknown backend {other:?} (expected synthetic or real)"
            )),
        }
    }
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackendKind::Synthetic => "synthetic",
            BackendKind::Real => "real",
        })
    }
}

/// A loaded generator together with the mask provider that matches it.
#[derive(Clone)]
pub struct Engine {
    pub kind: BackendKind,
    pub generator: Arc<dyn GeneratorBackend>,
    pub masks: Arc<dyn MaskProvider>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("kind", &self.kind)
            .field("generator", &self.generator.name())
            .finish()
    }
}

impl Engine {
    pub fn synthetic(feather_px: f32) -> Self {
        Self {
            kind: BackendKind::Synthetic,
            generator: Arc::new(SyntheticBackend::new()),
            masks: Arc::new(TemplateMasks::new(feather_px)),
        }
    }

    /// Loads the requested backend. A `real` request never falls back to the
    /// synthetic renderer.
    pub fn load(
        kind: BackendKind,
        bridge: &BridgeConfig,
        feather_px: f32,
    ) -> Result<Self, BackendError> {
        match kind {
            BackendKind::Synthetic => Ok(Self::synthetic(feather_px)),
            BackendKind::Real => {
                let torch = Arc::new(TorchBridge::spawn(bridge)?);
                let template = TemplateMasks::new(feather_px);
                let masks: Arc<dyn MaskProvider> = if torch.has_parser() {
                    Arc::new(ParserMasks::new(torch.clone(), template))
                } else {
                    Arc::new(template)
                };
                Ok(Self {
                    kind,
                    generator: torch,
                    masks,
                })
            }
        }
    }
}
