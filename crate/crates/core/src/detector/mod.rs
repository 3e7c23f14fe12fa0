//! Plate localization.
//!
//! Two backends produce [`RotatedBox`] candidates: decoding of precomputed
//! EAST-style score/geometry maps followed by locality-aware NMS, and a
//! classical edge/contour detector. Both feed the same plate filters.

mod east;
mod filter;
mod geometry;
mod heuristic;
mod nms;

pub use east::{
    decode_east, decode_emap, encode_emap, load_geometry_map, load_score_map, load_tensor, rbox_from_geometry,
    save_geometry_map, save_score_map, GeometryMap, ScoreMap, Tensor, DEFAULT_STRIDE, EMAP_MAGIC, EMAP_VERSION,
};
pub use filter::{clip_to_image, filter_plate_candidates};
pub use geometry::{
    clip_convex, intersection_area, iou_rotated, normalize_angle, polygon_area, signed_area, BoxRecord, Point,
    RotatedBox,
};
pub use heuristic::{detect_heuristic, sobel_vertical_edges};
pub use nms::{merge_weighted, nms_locality_aware, nms_standard};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("not an EMAP file (bad magic)")]
    BadMagic,
    #[error("unsupported EMAP version {0}")]
    UnsupportedVersion(u32),
    #[error("unsupported channel count {0}, expected 1 or 5")]
    UnsupportedChannels(u32),
    #[error("tensor dimensions {rows}x{cols}x{channels} overflow")]
    DimensionOverflow { rows: usize, cols: usize, channels: usize },
    #[error("payload length mismatch: expected {expected} bytes, found {actual}")]
    PayloadLength { expected: usize, actual: usize },
    #[error("invalid tensor value {value} at index {index}: {reason}")]
    InvalidValue { index: usize, value: f32, reason: &'static str },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid detector config: {0}")]
    Config(String),
    #[error(transparent)]
    Image(#[from] crate::imaging::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DetectorError>;

/// Thresholds and plate filters shared by both detector backends.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    /// Minimum cell score for a geometry-map cell to emit a box.
    pub score_threshold: f64,
    pub nms_iou_threshold: f64,
    /// Image pixels per map cell.
    pub stride: u32,
    /// Accepted box area range, px².
    pub min_box_area: f64,
    pub max_box_area: f64,
    /// Accepted `w / h` range.
    pub aspect_min: f64,
    pub aspect_max: f64,
    /// Mean gray value required inside a box; 0 disables the check.
    pub min_mean_pixel: f64,
    /// Width of the horizontal closing element of the edge detector.
    pub closing_width: usize,
    /// Floor under the Otsu edge threshold, so flat frames yield no edges.
    pub min_edge_magnitude: u8,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            score_threshold: 0.8,
            nms_iou_threshold: 0.2,
            stride: DEFAULT_STRIDE,
            min_box_area: 300.0,
            max_box_area: 150_000.0,
            aspect_min: 1.5,
            aspect_max: 8.0,
            min_mean_pixel: 0.0,
            closing_width: 9,
            min_edge_magnitude: 24,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.score_threshold) {
            return Err(DetectorError::Config(format!("score_threshold {} not in (0, 1)", self.score_threshold)));
        }
        if !open_unit(self.nms_iou_threshold) {
            return Err(DetectorError::Config(format!("nms_iou_threshold {} not in (0, 1)", self.nms_iou_threshold)));
        }
        if self.stride == 0 {
            return Err(DetectorError::Config("stride must be positive".into()));
        }
        if !(self.aspect_min < self.aspect_max) || self.aspect_min < 0.0 {
            return Err(DetectorError::Config(format!(
                "aspect range [{}, {}] is empty",
                self.aspect_min, self.aspect_max
            )));
        }
        if !(self.min_box_area <= self.max_box_area) || self.min_box_area < 0.0 {
            return Err(DetectorError::Config(format!(
                "area range [{}, {}] is empty",
                self.min_box_area, self.max_box_area
            )));
        }
        if self.closing_width == 0 {
            return Err(DetectorError::Config("closing_width must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        DetectorConfig::default().validate().unwrap();
    }

    #[test]
    fn config_rejects_bad_ranges() {
        let bad = [
            DetectorConfig { score_threshold: 1.0, ..Default::default() },
            DetectorConfig { nms_iou_threshold: 0.0, ..Default::default() },
            DetectorConfig { aspect_min: 8.0, aspect_max: 1.5, ..Default::default() },
            DetectorConfig { stride: 0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
