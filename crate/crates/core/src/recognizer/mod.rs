//! Plate reading: preprocessing, character segmentation and whitelist
//! template matching.

mod segment;
mod templates;

pub use segment::{segment_characters, CharSegment, SegmentParams};
pub use templates::{
    build_template_library, match_glyph, normalize_glyph, TemplateLibrary, DEFAULT_GLYPH_H, DEFAULT_GLYPH_W,
};

use regex::Regex;
use serde::Serialize;
use thiserror::Error;

use crate::detector::RotatedBox;
use crate::imaging::{
    equalization_lut, equalize_histogram, gaussian_blur, otsu_threshold, threshold_binary, to_grayscale, ImageBuffer,
    Threshold, ThresholdMode,
};

pub const DEFAULT_PLATE_PATTERN: &str = "^[A-Z]{2}[0-9]{1,2}[A-Z]{1,2}[0-9]{4}$";

#[derive(Debug, Error)]
pub enum RecognizeError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid plate pattern: {0}")]
    Pattern(#[from] regex::Error),
    #[error("no glyph file for {}", .0.iter().map(|c| format!("'{c}'")).collect::<Vec<_>>().join(", "))]
    MissingGlyphs(Vec<char>),
    #[error("more than one glyph file for '{0}'")]
    DuplicateGlyph(char),
    #[error(transparent)]
    Image(#[from] crate::imaging::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RecognizeError>;

/// Text read from one plate crop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlateRead {
    pub text: String,
    pub char_confidences: Vec<f64>,
    pub source_box: RotatedBox,
    pub mean_confidence: f64,
}

impl PlateRead {
    fn from_chars(chars: Vec<(char, f64)>, source_box: RotatedBox) -> Self {
        let text = chars.iter().map(|&(c, _)| c).collect();
        let char_confidences: Vec<f64> = chars.iter().map(|&(_, s)| s).collect();
        let mean_confidence = if char_confidences.is_empty() {
            0.0
        } else {
            char_confidences.iter().sum::<f64>() / char_confidences.len() as f64
        };
        Self { text, char_confidences, source_box, mean_confidence }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecognizeParams {
    pub blur_sigma: f64,
    pub blur_ksize: usize,
    /// Characters matching below this score are dropped from the text.
    pub reject_threshold: f64,
    pub segment: SegmentParams,
}

impl Default for RecognizeParams {
    fn default() -> Self {
        Self { blur_sigma: 1.0, blur_ksize: 3, reject_threshold: 0.55, segment: SegmentParams::default() }
    }
}

/// Gray → blur → equalize → binarize.
///
/// The Otsu threshold is chosen on the blurred histogram and carried through
/// the equalization table. Equalization flattens the histogram, and Otsu on
/// a flat histogram degenerates into a median split that cuts into the
/// background of any plate whose text covers less than half the crop.
pub fn binarize_plate(crop: &ImageBuffer, params: &RecognizeParams) -> Result<ImageBuffer> {
    let gray = to_grayscale(crop);
    let blurred = gaussian_blur(&gray, params.blur_sigma, params.blur_ksize)?;
    let hist = blurred.histogram();
    let t = otsu_threshold(&hist);
    let (equalized, t) = match equalization_lut(&hist) {
        Some(lut) => (equalize_histogram(&blurred)?, lut[t as usize]),
        None => (blurred, t),
    };
    Ok(threshold_binary(&equalized, Threshold { value: t, mode: ThresholdMode::Otsu })?)
}

/// Reads the characters of a plate crop.
///
/// The crop is binarized with [`binarize_plate`], segmented, and each
/// segment matched against `lib`. `source_box` is set to the full crop;
/// callers that cropped from a frame replace it with the frame box.
pub fn recognize_plate(crop: &ImageBuffer, lib: &TemplateLibrary, params: &RecognizeParams) -> Result<PlateRead> {
    let binary = binarize_plate(crop, params)?;
    let segments = segment_characters(&binary, &params.segment)?;
    let chars =
        segments.iter().map(|s| match_glyph(s, lib)).filter(|&(_, score)| score >= params.reject_threshold).collect();
    let full = RotatedBox::from_corners(0.0, 0.0, crop.width() as f64, crop.height() as f64, 1.0);
    Ok(PlateRead::from_chars(chars, full))
}

/// Compiled plate-format rule. Matching always covers the whole string.
#[derive(Debug, Clone)]
pub struct PlateFormat {
    pattern: String,
    anchored: Regex,
}

impl PlateFormat {
    pub fn new(pattern: &str) -> Result<Self> {
        Regex::new(pattern)?;
        let anchored = Regex::new(&format!("^(?:{pattern})$"))?;
        Ok(Self { pattern: pattern.to_string(), anchored })
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn matches(&self, text: &str) -> bool {
        self.anchored.is_match(text)
    }
}

impl Default for PlateFormat {
    fn default() -> Self {
        Self::new(DEFAULT_PLATE_PATTERN).expect("default pattern compiles")
    }
}

/// Full-string match of `text` against `pattern`.
pub fn validate_format(text: &str, pattern: &str) -> Result<bool> {
    Ok(PlateFormat::new(pattern)?.matches(text))
}
