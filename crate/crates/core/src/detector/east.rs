//! Score/geometry map tensors (EMAP files) and RBOX decoding.

use std::fs;
use std::path::Path;

use super::{DetectorConfig, DetectorError, Point, Result, RotatedBox};

pub const EMAP_MAGIC: [u8; 4] = *b"EMAP";
pub const EMAP_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;
pub const DEFAULT_STRIDE: u32 = 4;

/// Per-cell text probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    rows: usize,
    cols: usize,
    stride: u32,
    values: Vec<f32>,
}

impl ScoreMap {
    pub fn new(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        check_len(rows, cols, 1, values.len())?;
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(DetectorError::InvalidValue { index: i, value: *v, reason: "score outside [0, 1]" });
        }
        Ok(Self { rows, cols, stride: DEFAULT_STRIDE, values })
    }

    pub fn with_stride(mut self, stride: u32) -> Self {
        self.stride = stride;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.cols + col]
    }
}

/// Per-cell RBOX geometry: `[d_top, d_right, d_bottom, d_left, theta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryMap {
    rows: usize,
    cols: usize,
    stride: u32,
    values: Vec<f32>,
}

impl GeometryMap {
    pub const CHANNELS: usize = 5;

    pub fn new(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        check_len(rows, cols, Self::CHANNELS, values.len())?;
        for (i, v) in values.iter().enumerate() {
            let is_distance = i % Self::CHANNELS < 4;
            if !v.is_finite() || (is_distance && *v < 0.0) {
                return Err(DetectorError::InvalidValue {
                    index: i,
                    value: *v,
                    reason: "negative or non-finite geometry",
                });
            }
        }
        Ok(Self { rows, cols, stride: DEFAULT_STRIDE, values })
    }

    pub fn with_stride(mut self, stride: u32) -> Self {
        self.stride = stride;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn cell(&self, row: usize, col: usize) -> [f32; 5] {
        let i = (row * self.cols + col) * Self::CHANNELS;
        let mut out = [0f32; 5];
        out.copy_from_slice(&self.values[i..i + Self::CHANNELS]);
        out
    }
}

fn check_len(rows: usize, cols: usize, channels: usize, len: usize) -> Result<()> {
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(channels))
        .ok_or(DetectorError::DimensionOverflow { rows, cols, channels })?;
    if expected != len {
        return Err(DetectorError::PayloadLength { expected, actual: len });
    }
    Ok(())
}

/// A decoded EMAP file.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Score(ScoreMap),
    Geometry(GeometryMap),
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    decode_emap(&fs::read(path)?)
}

pub fn load_score_map(path: impl AsRef<Path>) -> Result<ScoreMap> {
    match load_tensor(path)? {
        Tensor::Score(s) => Ok(s),
        Tensor::Geometry(_) => Err(DetectorError::UnsupportedChannels(5)),
    }
}

pub fn load_geometry_map(path: impl AsRef<Path>) -> Result<GeometryMap> {
    match load_tensor(path)? {
        Tensor::Geometry(g) => Ok(g),
        Tensor::Score(_) => Err(DetectorError::UnsupportedChannels(1)),
    }
}

/// Parses an EMAP byte stream: `"EMAP"`, then little-endian u32 version,
/// rows, cols, channels, then `rows·cols·channels` little-endian f32 in
/// (row, col, channel) order.
pub fn decode_emap(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 4 || bytes[..4] != EMAP_MAGIC {
        return Err(DetectorError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(DetectorError::PayloadLength { expected: HEADER_LEN, actual: bytes.len() });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let version = word(0);
    if version != EMAP_VERSION {
        return Err(DetectorError::UnsupportedVersion(version));
    }
    let (rows, cols, channels) = (word(1) as usize, word(2) as usize, word(3) as usize);
    if channels != 1 && channels != GeometryMap::CHANNELS {
        return Err(DetectorError::UnsupportedChannels(channels as u32));
    }
    let count = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(channels))
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or(DetectorError::DimensionOverflow { rows, cols, channels })?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != count * 4 {
        return Err(DetectorError::PayloadLength { expected: count * 4, actual: payload.len() });
    }
    let values: Vec<f32> = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    if channels == 1 {
        ScoreMap::new(rows, cols, values).map(Tensor::Score)
    } else {
        GeometryMap::new(rows, cols, values).map(Tensor::Geometry)
    }
}

pub fn encode_emap(rows: usize, cols: usize, channels: usize, values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + values.len() * 4);
    out.extend_from_slice(&EMAP_MAGIC);
    for word in [EMAP_VERSION, rows as u32, cols as u32, channels as u32] {
        out.extend_from_slice(&word.to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn save_score_map(map: &ScoreMap, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_emap(map.rows, map.cols, 1, &map.values))?;
    Ok(())
}

pub fn save_geometry_map(map: &GeometryMap, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_emap(map.rows, map.cols, GeometryMap::CHANNELS, &map.values))?;
    Ok(())
}

/// Box predicted by a single cell whose anchor sits at `anchor`.
///
/// In the frame rotated by `theta` about the anchor, the left/right edges lie
/// at `-d_left`/`+d_right` and the top/bottom edges at `-d_top`/`+d_bottom`.
pub fn rbox_from_geometry(anchor: Point, geometry: [f32; 5], score: f64) -> RotatedBox {
    let [top, right, bottom, left, theta] = geometry.map(|v| v as f64);
    let local = Point::new(anchor.x + (right - left) / 2.0, anchor.y + (bottom - top) / 2.0);
    let center = local.rotated_about(anchor, theta);
    RotatedBox::new(center.x, center.y, left + right, top + bottom, theta, score)
}

/// Emits one box per cell with score ≥ `cfg.score_threshold`, in row-major
/// cell order, anchoring cell `(r, c)` at `(c·stride, r·stride)`. Cells
/// whose geometry has zero width or height are skipped.
pub fn decode_east(score: &ScoreMap, geometry: &GeometryMap, cfg: &DetectorConfig) -> Result<Vec<RotatedBox>> {
    if score.rows != geometry.rows || score.cols != geometry.cols {
        return Err(DetectorError::Argument(format!(
            "score map {}x{} does not match geometry map {}x{}",
            score.rows, score.cols, geometry.rows, geometry.cols
        )));
    }
    if score.stride != geometry.stride {
        return Err(DetectorError::Argument(format!(
            "score stride {} does not match geometry stride {}",
            score.stride, geometry.stride
        )));
    }
    let stride = score.stride as f64;
    let threshold = cfg.score_threshold;
    let mut boxes = Vec::new();
    for (i, &s) in score.values.iter().enumerate() {
        if (s as f64) < threshold {
            continue;
        }
        let (row, col) = (i / score.cols, i % score.cols);
        let g = &geometry.values[i * GeometryMap::CHANNELS..(i + 1) * GeometryMap::CHANNELS];
        if g[0] + g[2] <= 0.0 || g[1] + g[3] <= 0.0 {
            continue;
        }
        let anchor = Point::new(col as f64 * stride, row as f64 * stride);
        boxes.push(rbox_from_geometry(anchor, [g[0], g[1], g[2], g[3], g[4]], s as f64));
    }
    Ok(boxes)
}
