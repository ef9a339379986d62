//! Local and global attribute transfer, and the render pipeline that applies
//! every active reference to a target in one deterministic pass.
//!
//! Globals are resolved jointly in latent space with [`compose_weighted`].
//! Each local contribution then gets its own candidate render, pre-blended
//! on the local layer group, which is alpha-composited into the global result
//! through its region mask. Locals are applied in canonical attribute order
//! (eyes, nose, mouth, hair), placement order within one attribute.

use serde::Serialize;
use thiserror::Error;

use crate::attributes::{Attribute, AttributeSpec, Region, TransferMode};
use crate::backend::{BackendError, GeneratorBackend, MaskError, MaskProvider};
use crate::latent::{self, blend_layers, compose_weighted, LatentCode, LatentError, Weight};
use crate::mask::RegionMask;
use crate::raster::{Image, RasterError};
use crate::store::ImageRef;

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("{attribute} is a {actual} attribute, expected {expected}")]
    Mode {
        attribute: Attribute,
        expected: &'static str,
        actual: &'static str,
    },
    #[error(transparent)]
    Latent(#[from] LatentError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("mask for {region} has size {actual:?}, image is {expected:?}")]
    MaskSize {
        region: Region,
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("no mask for region {0}")]
    MaskMissing(Region),
    #[error(transparent)]
    Masks(#[from] MaskError),
    #[error("generation failed: {0}")]
    Generation(#[from] BackendError),
}

fn mode_name(spec: &AttributeSpec) -> &'static str {
    if spec.is_global() {
        "global"
    } else {
        "local"
    }
}

/// Moves the attribute's layer group of `target` toward `reference`.
pub fn transfer_global(
    target: &LatentCode,
    reference: &LatentCode,
    spec: &AttributeSpec,
    w: Weight,
) -> Result<LatentCode, TransferError> {
    match &spec.mode {
        TransferMode::Global { layers } => Ok(blend_layers(target, reference, layers, w)?),
        TransferMode::Local { .. } => Err(TransferError::Mode {
            attribute: spec.attribute,
            expected: "global",
            actual: mode_name(spec),
        }),
    }
}

/// `out = target + w·alpha·(blended − target)` per pixel; zero-alpha pixels
/// are copied from `target`.
pub fn transfer_local(
    target: &Image,
    blended: &Image,
    mask: &RegionMask,
    w: Weight,
) -> Result<Image, TransferError> {
    blended.ensure_dims(target.dims())?;
    if mask.dims() != target.dims() {
        return Err(TransferError::MaskSize {
            region: mask.region(),
            expected: target.dims(),
            actual: mask.dims(),
        });
    }
    let mut out = target.clone();
    if w.is_zero() {
        return Ok(out);
    }
    let pixels = out.as_mut_slice().chunks_exact_mut(3);
    for ((px, src), &alpha) in pixels.zip(blended.as_slice().chunks_exact(3)).zip(mask.alpha()) {
        if alpha == 0.0 {
            continue;
        }
        let f = w.value() * f64::from(alpha);
        for (o, &s) in px.iter_mut().zip(src) {
            *o = latent::lerp(*o, s, f);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub reference: ImageRef,
    pub latent: LatentCode,
    pub spec: AttributeSpec,
    pub weight: Weight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferRequest {
    pub target_latent: LatentCode,
    pub target_image: Image,
    pub contributions: Vec<Contribution>,
}

/// What the pipeline did with one contribution, for reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppliedContribution {
    pub reference: ImageRef,
    pub attribute: Attribute,
    pub mode: &'static str,
    pub weight: f64,
    pub layers: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
}

impl TransferRequest {
    pub fn new(target_latent: LatentCode, target_image: Image) -> Self {
        Self {
            target_latent,
            target_image,
            contributions: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), TransferError> {
        let shape = self.target_latent.shape();
        for c in &self.contributions {
            c.latent.ensure_shape(shape)?;
            if c.spec.layers().len() != shape.layers {
                return Err(LatentError::MaskLength {
                    mask: c.spec.layers().len(),
                    layers: shape.layers,
                }
                .into());
            }
        }
        Ok(())
    }

    /// Contributions in the order the pipeline applies them, zero weights
    /// dropped.
    pub fn applied(&self) -> Vec<AppliedContribution> {
        let (globals, locals) = self.partition();
        globals
            .into_iter()
            .chain(locals)
            .map(|c| AppliedContribution {
                reference: c.reference.clone(),
                attribute: c.spec.attribute,
                mode: mode_name(&c.spec),
                weight: c.weight.value(),
                layers: c.spec.layers().indices().collect(),
                region: c.spec.region(),
            })
            .collect()
    }

    fn partition(&self) -> (Vec<&Contribution>, Vec<&Contribution>) {
        let active = self.contributions.iter().filter(|c| !c.weight.is_zero());
        let (globals, mut locals): (Vec<_>, Vec<_>) = active.partition(|c| c.spec.is_global());
        locals.sort_by_key(|c| c.spec.attribute);
        (globals, locals)
    }
}

/// Renders `req` through `backend`, drawing region masks from `masks`.
pub fn render_result(
    req: &TransferRequest,
    backend: &dyn GeneratorBackend,
    masks: &dyn MaskProvider,
) -> Result<Image, TransferError> {
    req.validate()?;
    req.target_latent.ensure_shape(backend.latent_shape())?;
    let (globals, locals) = req.partition();

    let layered: Vec<latent::LayerContribution<'_>> = globals
        .iter()
        .map(|c| latent::LayerContribution {
            latent: &c.latent,
            mask: c.spec.layers(),
            weight: c.weight,
        })
        .collect();
    let mixed = compose_weighted(&req.target_latent, &layered)?;
    let mut out = backend.generate(&mixed)?;
    if locals.is_empty() {
        return Ok(out);
    }

    let region_masks = masks.masks_for(&req.target_image)?;
    for c in locals {
        let TransferMode::Local { region, layers } = &c.spec.mode else {
            unreachable!("partitioned as local");
        };
        let mask = region_masks
            .get(region)
            .ok_or(TransferError::MaskMissing(*region))?;
        let candidate = backend.generate(&blend_layers(&mixed, &c.latent, layers, c.weight)?)?;
        out = transfer_local(&out, &candidate, mask, c.weight)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::AttributeRegistry;
    use crate::backend::{SyntheticBackend, TemplateMasks};
    use crate::latent::LayerMask;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn w(v: f64) -> Weight {
        Weight::new(v).unwrap()
    }

    #[test]
    fn local_compositing_hand_value() {
        let t = Image::filled(1, 1, [0.2; 3]);
        let b = Image::filled(1, 1, [0.6; 3]);
        let m = RegionMask::new(Region::Mouth, 1, 1, vec![0.5]).unwrap();
        let out = transfer_local(&t, &b, &m, Weight::ONE).unwrap();
        for v in out.as_slice() {
            assert!((v - 0.4).abs() < 1e-7);
        }
    }

    #[test]
    fn local_endpoints_are_exact() {
        let t = Image::new(2, 1, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let b = Image::new(2, 1, vec![0.9, 0.7, 0.13, 0.0, 1.0, 0.33]).unwrap();
        let ones = RegionMask::new(Region::Eyes, 2, 1, vec![1.0, 1.0]).unwrap();
        assert_eq!(transfer_local(&t, &b, &ones, Weight::ZERO).unwrap(), t);
        assert_eq!(transfer_local(&t, &b, &ones, Weight::ONE).unwrap(), b);
    }

    #[test]
    fn local_rejects_mismatched_dims() {
        let t = Image::filled(2, 2, [0.0; 3]);
        let b = Image::filled(2, 1, [0.0; 3]);
        let m = RegionMask::new(Region::Eyes, 2, 2, vec![1.0; 4]).unwrap();
        assert!(matches!(
            transfer_local(&t, &b, &m, Weight::ONE),
            Err(TransferError::Raster(_))
        ));
        let small = RegionMask::new(Region::Eyes, 1, 1, vec![1.0]).unwrap();
        assert!(matches!(
            transfer_local(&t, &t, &small, Weight::ONE),
            Err(TransferError::MaskSize { .. })
        ));
    }

    #[test]
    fn global_rejects_local_attribute() {
        let reg = AttributeRegistry::with_default_groups(4);
        let z = LatentCode::zeros(crate::latent::LatentShape::new(4, 8).unwrap());
        let err = transfer_global(&z, &z, reg.get(Attribute::Mouth), Weight::ONE).unwrap_err();
        assert!(matches!(err, TransferError::Mode { .. }));
    }

    #[test]
    fn global_age_endpoint_touches_only_its_layers() {
        let backend = SyntheticBackend::new();
        let reg = AttributeRegistry::with_default_groups(4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = backend.sample_latent(&mut rng);
        let r = backend.sample_latent(&mut rng);
        let spec = reg.get(Attribute::Age);
        let out = transfer_global(&t, &r, spec, Weight::ONE).unwrap();
        for l in 0..4 {
            let want = if spec.layers().includes(l) { &r } else { &t };
            assert_eq!(out.layer(l), want.layer(l));
        }
        assert_eq!(transfer_global(&t, &r, spec, Weight::ZERO).unwrap(), t);
    }

    #[test]
    fn global_makeup_midpoint() {
        let backend = SyntheticBackend::new();
        let reg = AttributeRegistry::with_default_groups(4);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let t = backend.sample_latent(&mut rng);
        let r = backend.sample_latent(&mut rng);
        let spec = reg.get(Attribute::Makeup);
        let out = transfer_global(&t, &r, spec, w(0.5)).unwrap();
        for l in spec.layers().indices() {
            for k in 0..8 {
                // grid values: the midpoint is exact
                assert_eq!(out.layer(l)[k], (t.layer(l)[k] + r.layer(l)[k]) / 2.0);
            }
        }
    }

    fn request(
        backend: &SyntheticBackend,
        seed: u64,
        contribs: &[(Attribute, f64)],
    ) -> (TransferRequest, LatentCode) {
        let reg = AttributeRegistry::with_default_groups(4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = backend.sample_latent(&mut rng);
        let r = backend.sample_latent(&mut rng);
        let mut req = TransferRequest::new(t.clone(), backend.generate(&t).unwrap());
        for (i, &(a, wv)) in contribs.iter().enumerate() {
            req.contributions.push(Contribution {
                reference: ImageRef::for_bytes(&[i as u8]),
                latent: r.clone(),
                spec: reg.get(a).clone(),
                weight: w(wv),
            });
        }
        (req, r)
    }

    #[test]
    fn no_contributions_is_plain_render() {
        let b = SyntheticBackend::new();
        let (req, _) = request(&b, 1, &[]);
        let out = render_result(&req, &b, &TemplateMasks::default()).unwrap();
        assert_eq!(out, b.generate(&req.target_latent).unwrap());
    }

    #[test]
    fn full_layer_global_at_one_is_reference_render() {
        let b = SyntheticBackend::new();
        let (mut req, r) = request(&b, 2, &[(Attribute::Age, 1.0)]);
        req.contributions[0].spec.mode = TransferMode::Global {
            layers: LayerMask::all(4),
        };
        let out = render_result(&req, &b, &TemplateMasks::default()).unwrap();
        assert_eq!(out, b.generate(&r).unwrap());
    }

    #[test]
    fn mouth_transfer_is_confined_to_the_mouth_mask() {
        let b = SyntheticBackend::new();
        let masks = TemplateMasks::default();
        let (req, r) = request(&b, 3, &[(Attribute::Mouth, 1.0)]);
        let out = render_result(&req, &b, &masks).unwrap();
        let plain = b.generate(&req.target_latent).unwrap();
        let spec = &req.contributions[0].spec;
        let blended = b
            .generate(&blend_layers(&req.target_latent, &r, spec.layers(), Weight::ONE).unwrap())
            .unwrap();
        let mask = masks.mask(Region::Mouth, 128, 128);
        for y in 0..128 {
            for x in 0..128 {
                let a = mask.at(x, y);
                if a == 0.0 {
                    assert_eq!(out.pixel(x, y), plain.pixel(x, y));
                } else if a == 1.0 {
                    assert_eq!(out.pixel(x, y), blended.pixel(x, y));
                }
            }
        }
        assert_ne!(out, plain);
    }

    #[test]
    fn zero_weight_contribution_changes_nothing() {
        let b = SyntheticBackend::new();
        let masks = TemplateMasks::default();
        let (with, _) = request(
            &b,
            4,
            &[(Attribute::Eyes, 0.7), (Attribute::Hair, 0.0), (Attribute::Age, 0.0)],
        );
        let mut without = with.clone();
        without.contributions.truncate(1);
        assert_eq!(
            render_result(&with, &b, &masks).unwrap(),
            render_result(&without, &b, &masks).unwrap()
        );
    }

    #[test]
    fn applied_lists_globals_first_then_locals_canonically() {
        let b = SyntheticBackend::new();
        let (req, _) = request(
            &b,
            5,
            &[
                (Attribute::Hair, 0.5),
                (Attribute::Makeup, 0.5),
                (Attribute::Eyes, 0.5),
                (Attribute::Nose, 0.0),
            ],
        );
        let order: Vec<_> = req.applied().iter().map(|a| a.attribute).collect();
        assert_eq!(order, [Attribute::Makeup, Attribute::Eyes, Attribute::Hair]);
    }
}
