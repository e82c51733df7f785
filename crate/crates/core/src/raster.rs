//! 8-bit raster images and PNG/JPEG I/O.

use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};
use crate::stats::FeatureMatrix;

/// `height x width x channels` raster of 8-bit values, row-major with the
/// channel index varying fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::InvalidShape(format!(
                "image dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if pixels.len() != height * width * channels {
            return Err(Error::InvalidShape(format!(
                "{} bytes cannot fill a {height}x{width}x{channels} image",
                pixels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            pixels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Values of one channel in raster order.
    pub fn channel_plane(&self, channel: usize) -> Vec<u8> {
        self.pixels
            .iter()
            .skip(channel)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    /// One row per pixel, one column per channel.
    pub fn to_feature_matrix(&self) -> Result<FeatureMatrix> {
        let data = self.pixels.iter().map(|&v| f64::from(v)).collect();
        FeatureMatrix::new(data, self.pixel_count(), self.channels)
    }

    /// Quantizes a float matrix into an image of the given size.
    ///
    /// Values are rounded half away from zero. With `clamp` they are first
    /// limited to `[0, 255]`; without it, rounded values wrap modulo 256.
    pub fn from_feature_matrix(
        features: &FeatureMatrix,
        height: usize,
        width: usize,
        clamp: bool,
    ) -> Result<Self> {
        if features.n_samples() != height * width {
            return Err(Error::InvalidShape(format!(
                "{} samples cannot fill a {height}x{width} image",
                features.n_samples()
            )));
        }
        let pixels = features
            .as_slice()
            .iter()
            .map(|&v| quantize(v, clamp))
            .collect();
        Self::new(height, width, features.n_channels(), pixels)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let dynamic = image::open(path).map_err(|e| Error::ItemLoad {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Ok(Self::from_dynamic(dynamic))
    }

    fn from_dynamic(dynamic: DynamicImage) -> Self {
        let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
        let (channels, pixels) = match dynamic {
            DynamicImage::ImageLuma8(buf) => (1, buf.into_raw()),
            DynamicImage::ImageLumaA8(buf) => (2, buf.into_raw()),
            DynamicImage::ImageRgba8(buf) => (4, buf.into_raw()),
            d @ (DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_)) => {
                (1, d.into_luma8().into_raw())
            }
            d @ (DynamicImage::ImageRgba16(_) | DynamicImage::ImageRgba32F(_)) => {
                (4, d.into_rgba8().into_raw())
            }
            d => (3, d.into_rgb8().into_raw()),
        };
        Self {
            height: h,
            width: w,
            channels,
            pixels,
        }
    }

    /// Writes a PNG. Only 1 to 4 channel images have a PNG color type.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let fail = |reason: String| Error::OutputWrite {
            path: path.to_path_buf(),
            reason,
        };
        let color = match self.channels {
            1 => image::ExtendedColorType::L8,
            2 => image::ExtendedColorType::La8,
            3 => image::ExtendedColorType::Rgb8,
            4 => image::ExtendedColorType::Rgba8,
            c => return Err(fail(format!("cannot encode {c} channels as PNG"))),
        };
        image::save_buffer_with_format(
            path,
            &self.pixels,
            self.width as u32,
            self.height as u32,
            color,
            ImageFormat::Png,
        )
        .map_err(|e| fail(e.to_string()))
    }
}

fn quantize(v: f64, clamp: bool) -> u8 {
    if clamp {
        v.clamp(0.0, 255.0).round() as u8
    } else {
        (v.round() as i64).rem_euclid(256) as u8
    }
}
