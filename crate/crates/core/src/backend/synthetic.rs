//! A linear, analytically invertible stand-in for a pretrained generator.
//!
//! `image = base + Σ latent[l][k] · basis[l][k]`. The image is tiled into
//! 4×4 pixel blocks and each block belongs to exactly one `(layer, dim)`,
//! cycling through all 32 so every face region is touched by every layer.
//! The supports are pairwise disjoint, which makes encoding an exact
//! projection.
//!
//! Base and basis values are multiples of 2⁻⁸. Latents on a 2⁻¹⁰ grid
//! therefore render without rounding, which is what lets blend properties be
//! checked with exact equality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BackendError, GeneratorBackend};
use crate::latent::{LatentCode, LatentShape};
use crate::raster::Image;

const LAYERS: usize = 4;
const DIMS: usize = 8;
const SIZE: u32 = 128;
const SEED: u64 = 0x5eed_ca9a;
const TILE: u32 = 4;

/// Latent grid step that keeps rendering exact.
pub const LATENT_GRID: f32 = 1.0 / 1024.0;

#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    shape: LatentShape,
    width: u32,
    height: u32,
    base: Vec<f64>,
    /// `(layer, dim)` owning each pixel.
    owner: Vec<(u8, u8)>,
    /// RGB signature of every `(layer, dim)` basis image.
    colors: Vec<[f64; 3]>,
    /// Pixel count of every basis support.
    support: Vec<usize>,
}

fn quantize(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

impl Default for SyntheticBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl SyntheticBackend {
    pub fn new() -> Self {
        Self::with_size(SIZE, SIZE)
    }

    pub fn with_size(width: u32, height: u32) -> Self {
        let q = 1.0 / 256.0;

        let mut owner = Vec::with_capacity((width * height) as usize);
        let mut base = Vec::with_capacity((width * height * 3) as usize);
        for y in 0..height {
            for x in 0..width {
                let slot = ((x / TILE) + (y / TILE) * 5) as usize % (LAYERS * DIMS);
                owner.push(((slot % LAYERS) as u8, (slot / LAYERS) as u8));

                let fy = f64::from(y) / f64::from(height);
                let shade = 0.35 + 0.3 * fy;
                base.push(quantize(shade + 0.08, q));
                base.push(quantize(shade, q));
                base.push(quantize(shade - 0.05, q));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        let colors: Vec<[f64; 3]> = (0..LAYERS * DIMS)
            .map(|_| {
                let mut c = [0.0; 3];
                for ch in &mut c {
                    let steps: i32 = rng.random_range(4..=12);
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    *ch = sign * f64::from(steps) * q;
                }
                c
            })
            .collect();

        let mut support = vec![0usize; LAYERS * DIMS];
        for &(l, k) in &owner {
            support[l as usize * DIMS + k as usize] += 1;
        }
        debug_assert!(support.iter().all(|&n| n > 0), "every basis owns pixels");

        Self {
            shape: LatentShape {
                layers: LAYERS,
                width: DIMS,
            },
            width,
            height,
            base,
            owner,
            colors,
            support,
        }
    }

    /// The renderer before the final clip to `[0, 1]`, in f64.
    pub fn render_unclipped(&self, latent: &LatentCode) -> Result<Vec<f64>, BackendError> {
        latent.ensure_shape(self.shape)?;
        let z = latent.as_slice();
        let mut out = self.base.clone();
        for (p, &(l, k)) in self.owner.iter().enumerate() {
            let slot = l as usize * DIMS + k as usize;
            let amp = f64::from(z[slot]);
            let c = &self.colors[slot];
            for ch in 0..3 {
                out[p * 3 + ch] += amp * c[ch];
            }
        }
        Ok(out)
    }

    /// Random latent on the exact-render grid, values in `[-4, 4]`.
    pub fn sample_latent<R: Rng + ?Sized>(&self, rng: &mut R) -> LatentCode {
        let n = self.shape.layers * self.shape.width;
        let values = (0..n)
            .map(|_| rng.random_range(-4096i32..=4096) as f32 * LATENT_GRID)
            .collect();
        LatentCode::from_vec(self.shape, values).expect("finite by construction")
    }

    /// PNG of a random portrait, reproducible from `seed`.
    pub fn portrait_png(&self, seed: u64) -> Vec<u8> {
        let z = self.sample_latent(&mut ChaCha8Rng::seed_from_u64(seed));
        self.generate(&z)
            .and_then(|img| Ok(img.to_png()?))
            .expect("synthetic render encodes")
    }

    /// `(layer, dim)` whose basis image covers pixel `(x, y)`.
    pub fn owner_of(&self, x: u32, y: u32) -> (usize, usize) {
        let (l, k) = self.owner[(y * self.width + x) as usize];
        (l as usize, k as usize)
    }
}

impl GeneratorBackend for SyntheticBackend {
    fn name(&self) -> &str {
        "synthetic"
    }

    fn latent_shape(&self) -> LatentShape {
        self.shape
    }

    fn output_size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn is_reentrant(&self) -> bool {
        true
    }

    fn encode(&self, image: &Image) -> Result<LatentCode, BackendError> {
        let image = if image.dims() == self.output_size() {
            std::borrow::Cow::Borrowed(image)
        } else {
            let png = image.to_png()?;
            std::borrow::Cow::Owned(self.prepare(&png)?)
        };
        let px = image.as_slice();
        let mut dot = vec![0.0f64; LAYERS * DIMS];
        for (p, &(l, k)) in self.owner.iter().enumerate() {
            let slot = l as usize * DIMS + k as usize;
            let c = &self.colors[slot];
            for ch in 0..3 {
                dot[slot] += (f64::from(px[p * 3 + ch]) - self.base[p * 3 + ch]) * c[ch];
            }
        }
        let values = dot
            .iter()
            .enumerate()
            .map(|(slot, d)| {
                let c = &self.colors[slot];
                let energy = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]) * self.support[slot] as f64;
                (d / energy) as f32
            })
            .collect();
        Ok(LatentCode::from_vec(self.shape, values)?)
    }

    fn generate(&self, latent: &LatentCode) -> Result<Image, BackendError> {
        let raw = self.render_unclipped(latent)?;
        let pixels = raw.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect();
        Ok(Image::new(self.width, self.height, pixels).expect("sized buffer"))
    }
}
