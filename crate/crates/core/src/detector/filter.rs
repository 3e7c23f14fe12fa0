//! Plate-candidate elimination by size, shape and interior brightness.

use super::geometry::{clip_convex, Point, RotatedBox};
use super::DetectorConfig;
use crate::imaging::{luma, ImageBuffer};

/// Clips `bbox` to the image rectangle `[0, width] × [0, height]`.
///
/// The clipped polygon is measured along the box's own axes, so the result
/// keeps the original angle and score. Returns `None` when nothing of the
/// box lies inside the image.
pub fn clip_to_image(bbox: &RotatedBox, width: usize, height: usize) -> Option<RotatedBox> {
    let frame = [
        Point::new(0.0, 0.0),
        Point::new(width as f64, 0.0),
        Point::new(width as f64, height as f64),
        Point::new(0.0, height as f64),
    ];
    let clipped = clip_convex(&bbox.corners(), &frame);
    if clipped.len() < 3 {
        return None;
    }
    let (sin, cos) = bbox.angle.sin_cos();
    let (mut u0, mut u1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &clipped {
        let (dx, dy) = (p.x - bbox.cx, p.y - bbox.cy);
        let u = dx * cos + dy * sin;
        let v = -dx * sin + dy * cos;
        u0 = u0.min(u);
        u1 = u1.max(u);
        v0 = v0.min(v);
        v1 = v1.max(v);
    }
    let (w, h) = (u1 - u0, v1 - v0);
    if w <= 1e-9 || h <= 1e-9 {
        return None;
    }
    let (mu, mv) = ((u0 + u1) / 2.0, (v0 + v1) / 2.0);
    Some(RotatedBox { cx: bbox.cx + mu * cos - mv * sin, cy: bbox.cy + mu * sin + mv * cos, w, h, ..*bbox })
}

/// Mean gray value over pixels whose centers fall inside `bbox`.
fn mean_interior(img: &ImageBuffer, bbox: &RotatedBox) -> f64 {
    let (x0, y0, x1, y1) = bbox.bounds();
    let xs = (x0.floor().max(0.0) as usize)..(x1.ceil().min(img.width() as f64) as usize);
    let ys = (y0.floor().max(0.0) as usize)..(y1.ceil().min(img.height() as f64) as usize);
    let (mut sum, mut count) = (0u64, 0u64);
    for y in ys {
        for x in xs.clone() {
            if bbox.contains(Point::new(x as f64 + 0.5, y as f64 + 0.5)) {
                let p = img.pixel(x, y);
                sum += if p.len() == 3 { luma(p[0], p[1], p[2]) } else { p[0] } as u64;
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        sum as f64 / count as f64
    }
}

/// Keeps the boxes (clipped to the image) whose area, aspect ratio and mean
/// interior brightness fall within the configured ranges. Order is preserved.
pub fn filter_plate_candidates(boxes: &[RotatedBox], img: &ImageBuffer, cfg: &DetectorConfig) -> Vec<RotatedBox> {
    boxes
        .iter()
        .filter_map(|b| clip_to_image(b, img.width(), img.height()))
        .filter(|b| {
            let area = b.area();
            let aspect = b.aspect();
            area >= cfg.min_box_area
                && area <= cfg.max_box_area
                && aspect >= cfg.aspect_min
                && aspect <= cfg.aspect_max
                && (cfg.min_mean_pixel <= 0.0 || mean_interior(img, b) >= cfg.min_mean_pixel)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> DetectorConfig {
        DetectorConfig { min_box_area: 100.0, max_box_area: 10_000.0, ..Default::default() }
    }

    #[test]
    fn empty_input() {
        let img = ImageBuffer::filled(100, 100, 1, 0).unwrap();
        assert!(filter_plate_candidates(&[], &img, &cfg()).is_empty());
    }

    #[test]
    fn tall_box_removed() {
        let img = ImageBuffer::filled(300, 300, 1, 0).unwrap();
        let tall = RotatedBox::from_corners(50.0, 20.0, 60.0, 220.0, 0.9);
        assert!(filter_plate_candidates(&[tall], &img, &cfg()).is_empty());
    }

    #[test]
    fn straddling_boxes_clipped_before_measurement() {
        let img = ImageBuffer::filled(200, 100, 1, 128).unwrap();
        // 1) x in [-20, 60], y in [10, 30]: clipped to 60x20, aspect 3, area 1200 -> kept
        let a = RotatedBox::from_corners(-20.0, 10.0, 60.0, 30.0, 0.9);
        // 2) x in [180, 240], y in [40, 60]: clipped to 20x20, aspect 1 -> removed
        //    (unclipped aspect would be 3)
        let b = RotatedBox::from_corners(180.0, 40.0, 240.0, 60.0, 0.8);
        // 3) x in [100, 260], y in [-30, 10]: clipped to 100x10, aspect 10 -> removed;
        //    unclipped 160x40 would pass with aspect 4
        let c = RotatedBox::from_corners(100.0, -30.0, 260.0, 10.0, 0.7);
        // 4) entirely outside
        let d = RotatedBox::from_corners(300.0, 10.0, 360.0, 30.0, 0.6);
        let out = filter_plate_candidates(&[a, b, c, d], &img, &cfg());
        assert_eq!(out.len(), 1);
        let kept = out[0];
        assert!((kept.w - 60.0).abs() < 1e-9 && (kept.h - 20.0).abs() < 1e-9);
        assert!((kept.cx - 30.0).abs() < 1e-9 && (kept.cy - 20.0).abs() < 1e-9);
        assert_eq!(kept.score, 0.9);
    }

    #[test]
    fn clip_rotated_box_inside_is_identity() {
        let b = RotatedBox::new(50.0, 50.0, 30.0, 10.0, 0.5, 0.4);
        let c = clip_to_image(&b, 100, 100).unwrap();
        assert!((c.cx - b.cx).abs() < 1e-9 && (c.w - b.w).abs() < 1e-9 && (c.h - b.h).abs() < 1e-9);
    }

    #[test]
    fn brightness_floor() {
        let img = ImageBuffer::from_fn(200, 100, |x, _| if x < 100 { 40 } else { 220 }).unwrap();
        let dark = RotatedBox::from_corners(10.0, 10.0, 70.0, 30.0, 0.9);
        let bright = RotatedBox::from_corners(120.0, 10.0, 180.0, 30.0, 0.8);
        let cfg = DetectorConfig { min_mean_pixel: 100.0, ..cfg() };
        let out = filter_plate_candidates(&[dark, bright], &img, &cfg);
        assert_eq!(out, vec![bright]);
        let disabled = DetectorConfig { min_mean_pixel: 0.0, ..cfg };
        assert_eq!(filter_plate_candidates(&[dark, bright], &img, &disabled).len(), 2);
    }

    #[test]
    fn order_is_stable() {
        let img = ImageBuffer::filled(400, 100, 1, 0).unwrap();
        let boxes: Vec<RotatedBox> = (0..5)
            .map(|i| RotatedBox::from_corners(i as f64 * 70.0, 10.0, i as f64 * 70.0 + 60.0, 30.0, 0.1 * i as f64))
            .collect();
        assert_eq!(filter_plate_candidates(&boxes, &img, &cfg()), boxes);
    }
}
