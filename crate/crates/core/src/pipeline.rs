//! Glue from stored images to rendered results: decoding at backend
//! resolution, cached encoding, and plan → request → image.

use std::collections::HashMap;

use parking_lot::Mutex;

use crate::attributes::{AttributeRegistry, LayerGroups};
use crate::backend::{BackendError, Engine};
use crate::latent::LatentCode;
use crate::raster::Image;
use crate::session::{LatentSource, SessionError, TransferPlan};
use crate::store::{ImageRef, ImageStore};
use crate::transfer::{render_result, TransferError, TransferRequest};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("image store: {0}")]
    Io(#[from] std::io::Error),
}

pub struct Renderer {
    engine: Engine,
    registry: AttributeRegistry,
    cache: Mutex<HashMap<ImageRef, (Image, LatentCode)>>,
}

impl std::fmt::Debug for Renderer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Renderer")
            .field("engine", &self.engine)
            .finish_non_exhaustive()
    }
}

/// A [`LatentSource`] reading from one image store.
pub struct StoreSource<'a> {
    renderer: &'a Renderer,
    store: &'a ImageStore,
}

impl StoreSource<'_> {
    fn load(&self, image: &ImageRef) -> Result<(Image, LatentCode), BackendError> {
        if let Some(hit) = self.renderer.cache.lock().get(image) {
            return Ok(hit.clone());
        }
        let bytes = self
            .store
            .get(image)
            .map_err(|e| BackendError::InvalidInput(format!("image {image}: {e}")))?;
        let generator = &self.renderer.engine.generator;
        let decoded = generator.prepare(&bytes)?;
        let latent = generator.encode(&decoded)?;
        latent.ensure_shape(generator.latent_shape())?;
        self.renderer
            .cache
            .lock()
            .insert(image.clone(), (decoded.clone(), latent.clone()));
        Ok((decoded, latent))
    }
}

impl LatentSource for StoreSource<'_> {
    fn image(&self, image: &ImageRef) -> Result<Image, BackendError> {
        Ok(self.load(image)?.0)
    }

    fn latent(&self, image: &ImageRef) -> Result<LatentCode, BackendError> {
        Ok(self.load(image)?.1)
    }
}

impl Renderer {
    pub fn new(engine: Engine, groups: &LayerGroups) -> Self {
        let layers = engine.generator.latent_shape().layers;
        Self {
            registry: AttributeRegistry::new(layers, groups),
            engine,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn registry(&self) -> &AttributeRegistry {
        &self.registry
    }

    pub fn source<'a>(&'a self, store: &'a ImageStore) -> StoreSource<'a> {
        StoreSource {
            renderer: self,
            store,
        }
    }

    /// Checks that stored bytes decode at backend resolution.
    pub fn check_decodable(&self, store: &ImageStore, image: &ImageRef) -> Result<(), BackendError> {
        self.source(store).image(image).map(drop)
    }

    pub fn request(
        &self,
        plan: &TransferPlan,
        store: &ImageStore,
    ) -> Result<TransferRequest, PipelineError> {
        Ok(plan.resolve(&self.source(store), &self.registry)?)
    }

    pub fn render(&self, req: &TransferRequest) -> Result<Image, PipelineError> {
        Ok(render_result(
            req,
            self.engine.generator.as_ref(),
            self.engine.masks.as_ref(),
        )?)
    }

    /// Plan → PNG bytes of the result.
    pub fn render_plan_png(
        &self,
        plan: &TransferPlan,
        store: &ImageStore,
    ) -> Result<Vec<u8>, PipelineError> {
        let image = self.render(&self.request(plan, store)?)?;
        image
            .to_png()
            .map_err(|e| PipelineError::Backend(BackendError::Failure(e.to_string())))
    }
}
