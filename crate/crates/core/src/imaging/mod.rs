//! Pixel rasters and the preprocessing operations applied to frames and
//! plate crops: grayscale conversion, Gaussian blur, histogram equalization,
//! binary thresholding, bilinear resize and oriented cropping.

mod components;
mod filter;
mod pnm;
mod transform;

pub use components::{label_components, Component, Labeling};
pub use filter::{
    equalization_lut, equalize_histogram, gaussian_blur, gaussian_kernel, otsu_threshold, threshold_binary,
};
pub use pnm::{decode_pnm, encode_pnm, load_pnm, save_pnm};
pub use transform::{crop_rotated, resize_bilinear, sample_bilinear};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("malformed image at byte {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ImageError>;

/// Row-major 8-bit raster with one (gray) or three (RGB) interleaved channels.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl ImageBuffer {
    /// Creates a zero-filled image.
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::filled(width, height, channels, 0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        check_shape(width, height, channels)?;
        Ok(Self { width, height, channels, data: vec![value; width * height * channels] })
    }

    pub fn from_raw(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        check_shape(width, height, channels)?;
        if data.len() != width * height * channels {
            return Err(ImageError::Argument(format!(
                "expected {} samples for {width}x{height}x{channels}, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self { width, height, channels, data })
    }

    /// Builds a grayscale image from a per-pixel function.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        check_shape(width, height, 1)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Self { width, height, channels: 1, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn is_gray(&self) -> bool {
        self.channels == 1
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    /// Sample at `(x, y, channel)`, or `None` outside the raster.
    pub fn get(&self, x: usize, y: usize, channel: usize) -> Option<u8> {
        if x < self.width && y < self.height && channel < self.channels {
            Some(self.data[(y * self.width + x) * self.channels + channel])
        } else {
            None
        }
    }

    /// Channel-0 sample; panics when out of bounds.
    pub fn at(&self, x: usize, y: usize) -> u8 {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) outside {}x{}", self.width, self.height);
        self.data[(y * self.width + x) * self.channels]
    }

    pub fn set(&mut self, x: usize, y: usize, channel: usize, value: u8) {
        assert!(
            x < self.width && y < self.height && channel < self.channels,
            "pixel ({x}, {y}, {channel}) outside {}x{}x{}",
            self.width,
            self.height,
            self.channels
        );
        self.data[(y * self.width + x) * self.channels + channel] = value;
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        let stride = self.width * self.channels;
        &self.data[y * stride..(y + 1) * stride]
    }

    /// Copies the axis-aligned region `[x0, x0+w) × [y0, y0+h)`.
    pub fn subimage(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(ImageError::Argument(format!(
                "region {w}x{h}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        check_shape(w, h, self.channels)?;
        let mut data = Vec::with_capacity(w * h * self.channels);
        for y in y0..y0 + h {
            let row = self.row(y);
            data.extend_from_slice(&row[x0 * self.channels..(x0 + w) * self.channels]);
        }
        Ok(Self { width: w, height: h, channels: self.channels, data })
    }

    /// 256-bin histogram of channel 0.
    pub fn histogram(&self) -> [u64; 256] {
        let mut hist = [0u64; 256];
        for px in self.data.chunks_exact(self.channels) {
            hist[px[0] as usize] += 1;
        }
        hist
    }

    /// Inverts every sample (`255 - v`).
    pub fn inverted(&self) -> Self {
        Self { data: self.data.iter().map(|v| 255 - v).collect(), ..self.clone() }
    }
}

fn check_shape(width: usize, height: usize, channels: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(ImageError::Argument(format!("image dimensions must be positive, got {width}x{height}")));
    }
    if channels != 1 && channels != 3 {
        return Err(ImageError::Argument(format!("channels must be 1 or 3, got {channels}")));
    }
    width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| ImageError::Argument(format!("image {width}x{height}x{channels} overflows")))?;
    Ok(())
}

/// Kind of binarization threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    Fixed,
    Otsu,
}

/// A binarization threshold; pixels strictly above `value` become 255.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Threshold {
    pub value: u8,
    pub mode: ThresholdMode,
}

impl Threshold {
    pub fn fixed(value: u8) -> Self {
        Self { value, mode: ThresholdMode::Fixed }
    }

    /// Otsu threshold computed from the channel-0 histogram of `img`.
    pub fn otsu(img: &ImageBuffer) -> Self {
        Self { value: otsu_threshold(&img.histogram()), mode: ThresholdMode::Otsu }
    }
}

/// ITU-R BT.601 luma. Grayscale input is returned unchanged.
pub fn to_grayscale(img: &ImageBuffer) -> ImageBuffer {
    if img.channels == 1 {
        return img.clone();
    }
    let data = img.data.chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect();
    ImageBuffer { width: img.width, height: img.height, channels: 1, data }
}

#[inline]
pub(crate) fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round().clamp(0.0, 255.0) as u8
}
