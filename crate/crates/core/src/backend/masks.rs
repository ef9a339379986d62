use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;
use tracing::warn;

use crate::attributes::Region;
use crate::mask::{RegionMask, TemplateGeometry, DEFAULT_FEATHER_PX};
use crate::raster::Image;

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("face parser failed: {0}")]
    Parser(String),
}

pub type MaskSet = BTreeMap<Region, RegionMask>;

/// Supplies one soft mask per face region for an image.
pub trait MaskProvider: Send + Sync {
    fn name(&self) -> &str;

    fn masks_for(&self, image: &Image) -> Result<MaskSet, MaskError>;
}

/// Fixed aligned-face geometry; depends only on image size.
#[derive(Debug, Clone)]
pub struct TemplateMasks {
    geometry: TemplateGeometry,
    feather_px: f32,
}

impl Default for TemplateMasks {
    fn default() -> Self {
        Self::new(DEFAULT_FEATHER_PX)
    }
}

impl TemplateMasks {
    pub fn new(feather_px: f32) -> Self {
        Self::with_geometry(TemplateGeometry::default(), feather_px)
    }

    pub fn with_geometry(geometry: TemplateGeometry, feather_px: f32) -> Self {
        Self {
            geometry,
            feather_px,
        }
    }

    pub fn mask(&self, region: Region, width: u32, height: u32) -> RegionMask {
        let hard = self.geometry.hard_mask(region, width, height);
        RegionMask::from_hard(region, width, height, &hard, self.feather_px)
    }
}

impl MaskProvider for TemplateMasks {
    fn name(&self) -> &str {
        "template"
    }

    fn masks_for(&self, image: &Image) -> Result<MaskSet, MaskError> {
        let (w, h) = image.dims();
        Ok(Region::ALL
            .into_iter()
            .map(|r| (r, self.mask(r, w, h)))
            .collect())
    }
}

/// Per-pixel class labels from a face-parsing network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u8>,
}

pub trait FaceParser: Send + Sync {
    fn parse(&self, image: &Image) -> Result<LabelMap, MaskError>;
}

impl<P: FaceParser + ?Sized> FaceParser for Arc<P> {
    fn parse(&self, image: &Image) -> Result<LabelMap, MaskError> {
        (**self).parse(image)
    }
}

/// CelebAMask-HQ class ids making up each region.
fn classes(region: Region) -> &'static [u8] {
    match region {
        // brows + eyes
        Region::Eyes => &[2, 3, 4, 5],
        Region::Nose => &[10],
        // inner mouth + lips
        Region::Mouth => &[11, 12, 13],
        Region::Hair => &[17],
    }
}

/// Masks from a face parser, falling back to the fixed template when the
/// parser fails.
pub struct ParserMasks<P> {
    parser: P,
    fallback: TemplateMasks,
}

impl<P: FaceParser> ParserMasks<P> {
    pub fn new(parser: P, fallback: TemplateMasks) -> Self {
        Self { parser, fallback }
    }

    fn masks_from(&self, map: &LabelMap) -> MaskSet {
        Region::ALL
            .into_iter()
            .map(|region| {
                let ids = classes(region);
                let hard: Vec<bool> = map.labels.iter().map(|l| ids.contains(l)).collect();
                let mask = RegionMask::from_hard(
                    region,
                    map.width,
                    map.height,
                    &hard,
                    self.fallback.feather_px,
                );
                (region, mask)
            })
            .collect()
    }
}

impl<P: FaceParser> MaskProvider for ParserMasks<P> {
    fn name(&self) -> &str {
        "parser"
    }

    fn masks_for(&self, image: &Image) -> Result<MaskSet, MaskError> {
        let parsed = self.parser.parse(image).and_then(|map| {
            if map.width != image.width()
                || map.height != image.height()
                || map.labels.len() != image.pixel_count()
            {
                Err(MaskError::Parser(format!(
                    "label map is {}x{}, image is {}x{}",
                    map.width,
                    map.height,
                    image.width(),
                    image.height()
                )))
            } else {
                Ok(map)
            }
        });
        match parsed {
            Ok(map) => Ok(self.masks_from(&map)),
            Err(e) => {
                warn!(error = %e, "face parser failed, using template masks");
                self.fallback.masks_for(image)
            }
        }
    }
}
