//! Layered latent codes, the distance → weight ramp, and the blending algebra
//! every attribute transfer is built from.
//!
//! All functions here are pure over immutable values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default extended-latent shape of a 1024² style-based face generator.
pub const DEFAULT_LAYERS: usize = 18;
pub const DEFAULT_WIDTH: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatentError {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    Shape {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("layer mask has {mask} entries but latent has {layers} layers")]
    MaskLength { mask: usize, layers: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Latent shape as `(layers, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatentShape {
    pub layers: usize,
    pub width: usize,
}

impl LatentShape {
    pub fn new(layers: usize, width: usize) -> Result<Self, LatentError> {
        if layers == 0 || width == 0 {
            return Err(LatentError::Config(format!(
                "latent shape must be non-empty, got {layers}x{width}"
            )));
        }
        Ok(Self { layers, width })
    }

    fn pair(self) -> (usize, usize) {
        (self.layers, self.width)
    }
}

impl Default for LatentShape {
    fn default() -> Self {
        Self {
            layers: DEFAULT_LAYERS,
            width: DEFAULT_WIDTH,
        }
    }
}

/// One image's representation in the generator's per-layer latent space,
/// stored row-major as `layers × width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCode {
    shape: LatentShape,
    values: Vec<f32>,
}

impl LatentCode {
    pub fn from_vec(shape: LatentShape, values: Vec<f32>) -> Result<Self, LatentError> {
        if values.len() != shape.layers * shape.width {
            return Err(LatentError::Config(format!(
                "{} values cannot fill a {}x{} latent",
                values.len(),
                shape.layers,
                shape.width
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LatentError::NonFinite("latent code"));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: LatentShape) -> Self {
        Self {
            shape,
            values: vec![0.0; shape.layers * shape.width],
        }
    }

    /// Latent whose every element is `value` (must be finite).
    pub fn filled(shape: LatentShape, value: f32) -> Result<Self, LatentError> {
        Self::from_vec(shape, vec![value; shape.layers * shape.width])
    }

    pub fn shape(&self) -> LatentShape {
        self.shape
    }

    pub fn layer(&self, index: usize) -> &[f32] {
        let w = self.shape.width;
        &self.values[index * w..(index + 1) * w]
    }

    pub fn layer_mut(&mut self, index: usize) -> &mut [f32] {
        let w = self.shape.width;
        &mut self.values[index * w..(index + 1) * w]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.values
    }

    pub fn ensure_shape(&self, expected: LatentShape) -> Result<(), LatentError> {
        if self.shape != expected {
            return Err(LatentError::Shape {
                expected: expected.pair(),
                actual: self.shape.pair(),
            });
        }
        Ok(())
    }

    fn ensure_finite(&self, what: &'static str) -> Result<(), LatentError> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(LatentError::NonFinite(what))
        }
    }
}

/// Which layers an operation may modify.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerMask {
    included: Vec<bool>,
}

impl LayerMask {
    pub fn all(layers: usize) -> Self {
        Self {
            included: vec![true; layers],
        }
    }

    pub fn none(layers: usize) -> Self {
        Self {
            included: vec![false; layers],
        }
    }

    pub fn from_bools(included: Vec<bool>) -> Self {
        Self { included }
    }

    /// Mask including the layers in `range` (clipped to `layers`).
    pub fn range(layers: usize, range: std::ops::RangeInclusive<usize>) -> Self {
        let mut mask = Self::none(layers);
        for i in range.filter(|&i| i < layers) {
            mask.included[i] = true;
        }
        mask
    }

    pub fn len(&self) -> usize {
        self.included.len()
    }

    pub fn is_empty(&self) -> bool {
        self.included.is_empty()
    }

    pub fn includes(&self, layer: usize) -> bool {
        self.included.get(layer).copied().unwrap_or(false)
    }

    pub fn count(&self) -> usize {
        self.included.iter().filter(|&&b| b).count()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.included
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn is_disjoint(&self, other: &LayerMask) -> bool {
        self.included
            .iter()
            .zip(&other.included)
            .all(|(a, b)| !(*a && *b))
    }

    fn ensure_len(&self, layers: usize) -> Result<(), LatentError> {
        if self.included.len() != layers {
            return Err(LatentError::MaskLength {
                mask: self.included.len(),
                layers,
            });
        }
        Ok(())
    }
}

/// Influence of a reference, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Weight(f64);

impl Weight {
    pub const ZERO: Weight = Weight(0.0);
    pub const ONE: Weight = Weight(1.0);

    pub fn new(value: f64) -> Result<Self, LatentError> {
        if !value.is_finite() {
            return Err(LatentError::NonFinite("weight"));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(LatentError::Config(format!(
                "weight {value} outside [0, 1]"
            )));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }
}

impl TryFrom<f64> for Weight {
    type Error = LatentError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Weight::new(value)
    }
}

impl From<Weight> for f64 {
    fn from(w: Weight) -> f64 {
        w.0
    }
}

/// Linear falloff of influence with canvas distance: full influence at
/// `d_min`, none at `d_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceModel {
    pub d_min: f64,
    pub d_max: f64,
}

impl DistanceModel {
    pub fn new(d_min: f64, d_max: f64) -> Result<Self, LatentError> {
        let model = Self { d_min, d_max };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), LatentError> {
        if !self.d_min.is_finite() || !self.d_max.is_finite() {
            return Err(LatentError::Config(
                "distance model bounds must be finite".into(),
            ));
        }
        if self.d_min < 0.0 {
            return Err(LatentError::Config(format!(
                "d_min must be non-negative, got {}",
                self.d_min
            )));
        }
        if self.d_min >= self.d_max {
            return Err(LatentError::Config(format!(
                "d_min ({}) must be below d_max ({})",
                self.d_min, self.d_max
            )));
        }
        Ok(())
    }

    /// Inverts the ramp: the distance at which `weight` is reached.
    pub fn distance_for(&self, weight: Weight) -> f64 {
        self.d_max - weight.value() * (self.d_max - self.d_min)
    }
}

/// `clamp((d_max - d) / (d_max - d_min), 0, 1)`.
pub fn distance_to_weight(d: f64, model: &DistanceModel) -> Result<Weight, LatentError> {
    model.validate()?;
    if !d.is_finite() {
        return Err(LatentError::NonFinite("distance"));
    }
    if d < 0.0 {
        return Err(LatentError::Config(format!(
            "distance must be non-negative, got {d}"
        )));
    }
    let raw = (model.d_max - d) / (model.d_max - model.d_min);
    Ok(Weight(raw.clamp(0.0, 1.0)))
}

/// `target + w * (reference - target)` with exact endpoints.
#[inline]
pub(crate) fn lerp(target: f32, reference: f32, w: f64) -> f32 {
    if w == 0.0 {
        target
    } else if w == 1.0 {
        reference
    } else {
        let t = f64::from(target);
        (t + w * (f64::from(reference) - t)) as f32
    }
}

fn check_pair(target: &LatentCode, reference: &LatentCode) -> Result<(), LatentError> {
    reference.ensure_shape(target.shape)?;
    target.ensure_finite("target latent")?;
    reference.ensure_finite("reference latent")
}

/// Moves the masked layers of `target` toward `reference` by `w`; every other
/// layer is copied through untouched.
pub fn blend_layers(
    target: &LatentCode,
    reference: &LatentCode,
    mask: &LayerMask,
    w: Weight,
) -> Result<LatentCode, LatentError> {
    check_pair(target, reference)?;
    mask.ensure_len(target.shape.layers)?;

    let mut out = target.clone();
    if w.is_zero() {
        return Ok(out);
    }
    for layer in mask.indices() {
        let src = reference.layer(layer);
        for (o, &r) in out.layer_mut(layer).iter_mut().zip(src) {
            *o = lerp(*o, r, w.value());
        }
    }
    Ok(out)
}

/// One reference's say over a set of layers.
#[derive(Debug, Clone)]
pub struct LayerContribution<'a> {
    pub latent: &'a LatentCode,
    pub mask: &'a LayerMask,
    pub weight: Weight,
}

/// Resolves several references acting on overlapping layers.
///
/// Per layer, the displacements of every contribution that covers it are
/// summed with their weights and divided by `max(1, Σw)`, so the result stays
/// inside the hull of the target and the references. A layer with a single
/// active contribution is exactly [`blend_layers`].
pub fn compose_weighted(
    target: &LatentCode,
    contributions: &[LayerContribution<'_>],
) -> Result<LatentCode, LatentError> {
    target.ensure_finite("target latent")?;
    for c in contributions {
        check_pair(target, c.latent)?;
        c.mask.ensure_len(target.shape.layers)?;
    }

    let mut out = target.clone();
    let mut active: Vec<&LayerContribution<'_>> = Vec::with_capacity(contributions.len());
    for layer in 0..target.shape.layers {
        active.clear();
        active.extend(
            contributions
                .iter()
                .filter(|c| !c.weight.is_zero() && c.mask.includes(layer)),
        );
        match active.as_slice() {
            [] => {}
            [single] => {
                let src = single.latent.layer(layer);
                for (o, &r) in out.layer_mut(layer).iter_mut().zip(src) {
                    *o = lerp(*o, r, single.weight.value());
                }
            }
            many => {
                let total: f64 = many.iter().map(|c| c.weight.value()).sum();
                let norm = total.max(1.0);
                let base = target.layer(layer);
                for (k, o) in out.layer_mut(layer).iter_mut().enumerate() {
                    let t = base[k];
                    let mut lo = t;
                    let mut hi = t;
                    let mut shift = 0.0f64;
                    for c in many {
                        let r = c.latent.layer(layer)[k];
                        lo = lo.min(r);
                        hi = hi.max(r);
                        shift += c.weight.value() * (f64::from(r) - f64::from(t));
                    }
                    // rounding may land an ulp outside the hull
                    *o = ((f64::from(t) + shift / norm) as f32).clamp(lo, hi);
                }
            }
        }
    }
    Ok(out)
}
