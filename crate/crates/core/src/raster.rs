//! Floating-point RGB rasters and their 8-bit PNG interchange.

use std::io::Cursor;

use image::{imageops::FilterType, ImageFormat, RgbImage};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image dimensions {actual:?} do not match {expected:?}")]
    Dimensions {
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("cannot decode image: {0}")]
    Decode(String),
    #[error("cannot encode image: {0}")]
    Encode(String),
    #[error("buffer of {len} values cannot fill a {width}x{height} RGB image")]
    BufferSize { len: usize, width: u32, height: u32 },
}

/// Interleaved RGB image with channels nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<f32>,
}

impl Image {
    pub fn new(width: u32, height: u32, pixels: Vec<f32>) -> Result<Self, RasterError> {
        if pixels.len() != (width as usize) * (height as usize) * 3 {
            return Err(RasterError::BufferSize {
                len: pixels.len(),
                width,
                height,
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [f32; 3]) -> Self {
        let n = (width as usize) * (height as usize);
        let pixels = rgb.iter().copied().cycle().take(n * 3).collect();
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        (self.width as usize) * (self.height as usize)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.pixels
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f32; 3] {
        let i = ((y as usize) * (self.width as usize) + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn ensure_dims(&self, expected: (u32, u32)) -> Result<(), RasterError> {
        if self.dims() != expected {
            return Err(RasterError::Dimensions {
                expected,
                actual: self.dims(),
            });
        }
        Ok(())
    }

    pub fn clamped(mut self) -> Self {
        for v in &mut self.pixels {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }

    pub fn to_rgb8(&self) -> RgbImage {
        let bytes = self
            .pixels
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        RgbImage::from_raw(self.width, self.height, bytes).expect("buffer sized at construction")
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            pixels: img.as_raw().iter().map(|&b| f32::from(b) / 255.0).collect(),
        }
    }

    /// Lossless 8-bit RGB PNG.
    pub fn to_png(&self) -> Result<Vec<u8>, RasterError> {
        let mut out = Cursor::new(Vec::new());
        self.to_rgb8()
            .write_to(&mut out, ImageFormat::Png)
            .map_err(|e| RasterError::Encode(e.to_string()))?;
        Ok(out.into_inner())
    }

    /// Decodes any supported raster format and converts to RGB.
    pub fn decode(bytes: &[u8]) -> Result<Self, RasterError> {
        let img = image::load_from_memory(bytes).map_err(|e| RasterError::Decode(e.to_string()))?;
        Ok(Self::from_rgb8(&img.to_rgb8()))
    }

    /// Decodes and resamples to `(width, height)`; a no-op resize when the
    /// source already matches.
    pub fn decode_resized(bytes: &[u8], dims: (u32, u32)) -> Result<Self, RasterError> {
        let img = image::load_from_memory(bytes).map_err(|e| RasterError::Decode(e.to_string()))?;
        let rgb = img.to_rgb8();
        if rgb.dimensions() == dims {
            return Ok(Self::from_rgb8(&rgb));
        }
        let resized = image::imageops::resize(&rgb, dims.0, dims.1, FilterType::Triangle);
        Ok(Self::from_rgb8(&resized))
    }
}
