//! Character segmentation of a binarized plate crop.

use super::{RecognizeError, Result};
use crate::imaging::{label_components, ImageBuffer};

/// One character candidate. `x1`/`y1` are exclusive; `mask` holds the
/// component's own pixels as 255 over a `(x1 - x0) × (y1 - y0)` raster.
#[derive(Debug, Clone, PartialEq)]
pub struct CharSegment {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub mask: ImageBuffer,
}

impl CharSegment {
    pub fn center_x(&self) -> f64 {
        (self.x0 + self.x1) as f64 / 2.0
    }
}

/// Size limits for character components, relative to the crop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    pub min_height_frac: f64,
    pub max_height_frac: f64,
    pub min_width: usize,
    /// Maximum component width as a fraction of the crop width.
    pub max_width_frac: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self { min_height_frac: 0.3, max_height_frac: 0.95, min_width: 2, max_width_frac: 1.0 / 3.0 }
    }
}

/// Splits a binary plate into character components, left to right.
///
/// When more than half of the pixels are 255 the plate is treated as dark
/// text on a light background and inverted first. Overlapping components
/// are kept separate.
pub fn segment_characters(plate: &ImageBuffer, params: &SegmentParams) -> Result<Vec<CharSegment>> {
    if !plate.is_gray() {
        return Err(RecognizeError::Argument("segmentation needs a single-channel image".into()));
    }
    if let Some(v) = plate.data().iter().find(|&&v| v != 0 && v != 255) {
        return Err(RecognizeError::Argument(format!("segmentation needs a binary image, found value {v}")));
    }
    let (w, h) = (plate.width(), plate.height());
    let white = plate.data().iter().filter(|&&v| v == 255).count();
    let invert = white * 2 > plate.pixel_count();
    let mask: Vec<bool> = plate.data().iter().map(|&v| (v == 255) != invert).collect();
    let labeling = label_components(&mask, w, h);

    let min_h = params.min_height_frac * h as f64;
    let max_h = params.max_height_frac * h as f64;
    let max_w = params.max_width_frac * w as f64;
    let mut segments: Vec<CharSegment> = labeling
        .components
        .iter()
        .filter(|c| {
            let (cw, ch) = (c.width(), c.height());
            ch as f64 >= min_h && ch as f64 <= max_h && cw >= params.min_width && cw as f64 <= max_w
        })
        .map(|c| {
            let mask = ImageBuffer::from_fn(c.width(), c.height(), |x, y| {
                if labeling.labels[(c.y0 + y) * w + c.x0 + x] == c.label {
                    255
                } else {
                    0
                }
            })
            .expect("component has non-zero extent");
            CharSegment { x0: c.x0, y0: c.y0, x1: c.x1, y1: c.y1, mask }
        })
        .collect();
    segments.sort_by(|a, b| a.center_x().total_cmp(&b.center_x()));
    Ok(segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bars(invert: bool, speck: bool) -> ImageBuffer {
        let (bg, fg) = if invert { (255, 0) } else { (0, 255) };
        let mut img = ImageBuffer::filled(200, 40, 1, bg).unwrap();
        // ten 12x24 rectangles at x = 5 + 19k, drawn in reverse to exercise sorting
        for k in (0..10).rev() {
            for y in 8..32 {
                for x in 0..12 {
                    img.set(5 + 19 * k + x, y, 0, fg);
                }
            }
        }
        if speck {
            for (x, y) in [(195, 2), (196, 2), (195, 3), (196, 3)] {
                img.set(x, y, 0, fg);
            }
        }
        img
    }

    #[test]
    fn blank_crop_has_no_segments() {
        let img = ImageBuffer::filled(50, 20, 1, 0).unwrap();
        assert!(segment_characters(&img, &SegmentParams::default()).unwrap().is_empty());
    }

    #[test]
    fn ten_rectangles_left_to_right() {
        let segs = segment_characters(&bars(false, true), &SegmentParams::default()).unwrap();
        assert_eq!(segs.len(), 10);
        for (k, s) in segs.iter().enumerate() {
            assert_eq!((s.x0, s.y0, s.x1, s.y1), (5 + 19 * k, 8, 17 + 19 * k, 32));
            assert_eq!((s.mask.width(), s.mask.height()), (12, 24));
            assert!(s.mask.data().iter().all(|&v| v == 255));
        }
    }

    #[test]
    fn polarity_fix() {
        // 240 of 8000 pixels dark would be foreground without inversion
        let segs = segment_characters(&bars(true, false), &SegmentParams::default()).unwrap();
        assert_eq!(segs.len(), 10);
    }

    #[test]
    fn overlapping_components_not_merged() {
        // an L and a separate bar whose x-ranges overlap
        let mut img = ImageBuffer::filled(30, 20, 1, 0).unwrap();
        for y in 2..18 {
            img.set(5, y, 0, 255);
            img.set(6, y, 0, 255);
            img.set(9, y, 0, 255);
            img.set(10, y, 0, 255);
        }
        for x in 5..12 {
            img.set(x, 18, 0, 255);
        }
        img.set(9, 17, 0, 0);
        img.set(10, 17, 0, 0);
        img.set(9, 16, 0, 0);
        img.set(10, 16, 0, 0);
        let params = SegmentParams { max_width_frac: 1.0, ..Default::default() };
        let segs = segment_characters(&img, &params).unwrap();
        assert_eq!(segs.len(), 2);
        assert!(segs[0].x1 > segs[1].x0);
        assert!(segs[0].center_x() <= segs[1].center_x());
    }

    #[test]
    fn mask_holds_only_own_pixels() {
        let mut img = ImageBuffer::filled(20, 20, 1, 0).unwrap();
        for y in 2..18 {
            img.set(3, y, 0, 255);
        }
        for x in 3..10 {
            img.set(x, 17, 0, 255);
        }
        // separate dot inside the L's bounding box
        img.set(8, 4, 0, 255);
        img.set(8, 5, 0, 255);
        img.set(8, 6, 0, 255);
        img.set(8, 7, 0, 255);
        img.set(8, 8, 0, 255);
        img.set(8, 9, 0, 255);
        img.set(9, 9, 0, 255);
        let segs = segment_characters(&img, &SegmentParams { max_width_frac: 1.0, ..Default::default() }).unwrap();
        let l = segs.iter().find(|s| s.x0 == 3).unwrap();
        assert_eq!(l.mask.at(8 - 3, 4 - 2), 0);
    }

    #[test]
    fn rejects_non_binary() {
        let img = ImageBuffer::filled(10, 10, 1, 7).unwrap();
        assert!(matches!(segment_characters(&img, &SegmentParams::default()), Err(RecognizeError::Argument(_))));
    }
}
