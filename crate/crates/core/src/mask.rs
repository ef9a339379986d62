//! Soft region masks and the feathering that turns a hard region into one.

use serde::{Deserialize, Serialize};

use crate::attributes::Region;

pub const DEFAULT_FEATHER_PX: f32 = 5.0;

/// Per-pixel soft membership of one face region, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    region: Region,
    width: u32,
    height: u32,
    alpha: Vec<f32>,
}

impl RegionMask {
    pub fn new(region: Region, width: u32, height: u32, alpha: Vec<f32>) -> Option<Self> {
        let ok = alpha.len() == (width as usize) * (height as usize)
            && alpha.iter().all(|a| (0.0..=1.0).contains(a));
        ok.then_some(Self {
            region,
            width,
            height,
            alpha,
        })
    }

    /// Feathers a hard membership map inward by `band` pixels.
    pub fn from_hard(region: Region, width: u32, height: u32, hard: &[bool], band: f32) -> Self {
        Self {
            region,
            width,
            height,
            alpha: feather(hard, width, height, band),
        }
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn alpha(&self) -> &[f32] {
        &self.alpha
    }

    pub fn at(&self, x: u32, y: u32) -> f32 {
        self.alpha[(y as usize) * (self.width as usize) + x as usize]
    }

    pub fn support(&self) -> usize {
        self.alpha.iter().filter(|&&a| a > 0.0).count()
    }

    pub fn is_disjoint(&self, other: &RegionMask) -> bool {
        self.alpha
            .iter()
            .zip(&other.alpha)
            .all(|(a, b)| *a == 0.0 || *b == 0.0)
    }
}

/// Gaussian-profile inward feather.
///
/// A pixel inside the region at distance `d` from the nearest outside pixel
/// gets `(1 - exp(-d²/2σ²)) / (1 - exp(-band²/2σ²))` with `σ = band / 2`,
/// reaching exactly 1 at `d ≥ band`. Outside pixels stay 0, so the soft mask
/// never grows beyond the hard region. The image border does not count as
/// outside.
pub fn feather(hard: &[bool], width: u32, height: u32, band: f32) -> Vec<f32> {
    let (w, h) = (width as i64, height as i64);
    assert_eq!(hard.len(), (w * h) as usize, "hard mask size");
    if band <= 0.0 {
        return hard.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    }
    let band = f64::from(band);
    let sigma2 = 2.0 * (band / 2.0).powi(2);
    let norm = 1.0 - (-(band * band) / sigma2).exp();
    let reach = band.ceil() as i64 + 1;

    let mut out = vec![0.0f32; hard.len()];
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            if !hard[i] {
                continue;
            }
            let mut best = f64::INFINITY;
            for ny in (y - reach).max(0)..=(y + reach).min(h - 1) {
                for nx in (x - reach).max(0)..=(x + reach).min(w - 1) {
                    if !hard[(ny * w + nx) as usize] {
                        let d2 = ((nx - x).pow(2) + (ny - y).pow(2)) as f64;
                        best = best.min(d2);
                    }
                }
            }
            // distance from the pixel centre to the edge shared with the outside pixel
            let d = best.sqrt() - 0.5;
            out[i] = if d >= band {
                1.0
            } else {
                (((1.0 - (-(d * d) / sigma2).exp()) / norm) as f32).clamp(0.0, 1.0)
            };
        }
    }
    out
}

/// Axis-aligned rectangle in fractions of image size, half-open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracRect {
    pub top: f32,
    pub bottom: f32,
    pub left: f32,
    pub right: f32,
}

impl FracRect {
    pub const fn new(top: f32, bottom: f32, left: f32, right: f32) -> Self {
        Self {
            top,
            bottom,
            left,
            right,
        }
    }

    /// Whether pixel `(x, y)`'s centre falls inside.
    pub fn contains(&self, x: u32, y: u32, width: u32, height: u32) -> bool {
        let fx = (x as f32 + 0.5) / width as f32;
        let fy = (y as f32 + 0.5) / height as f32;
        fy >= self.top && fy < self.bottom && fx >= self.left && fx < self.right
    }
}

/// Region layout of an aligned face crop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateGeometry {
    pub eyes: Vec<FracRect>,
    pub nose: Vec<FracRect>,
    pub mouth: Vec<FracRect>,
    pub hair: Vec<FracRect>,
}

impl Default for TemplateGeometry {
    fn default() -> Self {
        Self {
            eyes: vec![FracRect::new(0.33, 0.45, 0.20, 0.80)],
            nose: vec![FracRect::new(0.45, 0.62, 0.35, 0.65)],
            mouth: vec![FracRect::new(0.62, 0.75, 0.25, 0.75)],
            hair: vec![
                FracRect::new(0.0, 0.30, 0.0, 1.0),
                FracRect::new(0.30, 0.60, 0.0, 0.12),
                FracRect::new(0.30, 0.60, 0.88, 1.0),
            ],
        }
    }
}

impl TemplateGeometry {
    pub fn rects(&self, region: Region) -> &[FracRect] {
        match region {
            Region::Eyes => &self.eyes,
            Region::Nose => &self.nose,
            Region::Mouth => &self.mouth,
            Region::Hair => &self.hair,
        }
    }

    pub fn hard_mask(&self, region: Region, width: u32, height: u32) -> Vec<bool> {
        let rects = self.rects(region);
        (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| rects.iter().any(|r| r.contains(x, y, width, height)))
            .collect()
    }
}
