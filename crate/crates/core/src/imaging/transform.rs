use super::{ImageBuffer, ImageError, Result};
use crate::detector::RotatedBox;

/// Bilinear resize with pixel-center alignment:
/// `src = (dst + 0.5) * scale - 0.5`, clamped to the source extent.
pub fn resize_bilinear(img: &ImageBuffer, new_w: usize, new_h: usize) -> Result<ImageBuffer> {
    if new_w == 0 || new_h == 0 {
        return Err(ImageError::Argument(format!("resize target must be positive, got {new_w}x{new_h}")));
    }
    if new_w == img.width() && new_h == img.height() {
        return Ok(img.clone());
    }
    let ch = img.channels();
    let xs = axis_weights(img.width(), new_w);
    let ys = axis_weights(img.height(), new_h);
    let src = img.data();
    let stride = img.width() * ch;
    let mut out = Vec::with_capacity(new_w * new_h * ch);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..ch {
                let p00 = src[y0 * stride + x0 * ch + c] as f32;
                let p01 = src[y0 * stride + x1 * ch + c] as f32;
                let p10 = src[y1 * stride + x0 * ch + c] as f32;
                let p11 = src[y1 * stride + x1 * ch + c] as f32;
                let top = p00 + (p01 - p00) * fx;
                let bottom = p10 + (p11 - p10) * fx;
                out.push((top + (bottom - top) * fy).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    ImageBuffer::from_raw(new_w, new_h, ch, out)
}

/// Per destination index: (lower source index, upper source index, fraction).
fn axis_weights(src_len: usize, dst_len: usize) -> Vec<(usize, usize, f32)> {
    let scale = src_len as f64 / dst_len as f64;
    let max = (src_len - 1) as f64;
    (0..dst_len)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src_len - 1);
            (lo, hi, (s - lo as f64) as f32)
        })
        .collect()
}

/// Bilinear sample at continuous pixel-index coordinates (pixel centers on
/// integers); neighbors outside the raster contribute 0.
pub fn sample_bilinear(img: &ImageBuffer, x: f64, y: f64, channel: usize) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let read = |xi: i64, yi: i64| -> f64 {
        if img.in_bounds(xi, yi) {
            img.get(xi as usize, yi as usize, channel).unwrap_or(0) as f64
        } else {
            0.0
        }
    };
    let top = read(x0, y0) * (1.0 - fx) + read(x0 + 1, y0) * fx;
    let bottom = read(x0, y0 + 1) * (1.0 - fx) + read(x0 + 1, y0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Resamples the oriented rectangle `bbox` into an `out_w × out_h` image.
///
/// Output pixel `(u, v)` maps to the point `((u+0.5)/out_w - 0.5) * w` along
/// the box's width axis and `((v+0.5)/out_h - 0.5) * h` along its height axis,
/// rotated by `bbox.angle` about the box center. Samples outside the source
/// read as 0.
pub fn crop_rotated(img: &ImageBuffer, bbox: &RotatedBox, out_w: usize, out_h: usize) -> Result<ImageBuffer> {
    if !(bbox.w > 0.0 && bbox.h > 0.0) {
        return Err(ImageError::Argument(format!("degenerate box {}x{}", bbox.w, bbox.h)));
    }
    if out_w == 0 || out_h == 0 {
        return Err(ImageError::Argument(format!("crop size must be positive, got {out_w}x{out_h}")));
    }
    let (sin, cos) = bbox.angle.sin_cos();
    let ch = img.channels();
    let sx = bbox.w / out_w as f64;
    let sy = bbox.h / out_h as f64;
    let mut out = Vec::with_capacity(out_w * out_h * ch);
    for v in 0..out_h {
        let ly = (v as f64 + 0.5) * sy - bbox.h / 2.0;
        for u in 0..out_w {
            let lx = (u as f64 + 0.5) * sx - bbox.w / 2.0;
            // continuous image coordinates; pixel i spans [i, i+1)
            let px = bbox.cx + lx * cos - ly * sin;
            let py = bbox.cy + lx * sin + ly * cos;
            for c in 0..ch {
                let value = sample_bilinear(img, px - 0.5, py - 0.5, c);
                out.push(value.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    ImageBuffer::from_raw(out_w, out_h, ch, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{rngs::StdRng, Rng, SeedableRng};
    use std::f64::consts::PI;

    fn random_image(rng: &mut StdRng, w: usize, h: usize) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, |_, _| rng.random()).unwrap()
    }

    #[test]
    fn resize_identity() {
        let mut rng = StdRng::seed_from_u64(1);
        let img = random_image(&mut rng, 13, 7);
        assert_eq!(resize_bilinear(&img, 13, 7).unwrap(), img);
    }

    #[test]
    fn resize_constant() {
        let img = ImageBuffer::filled(5, 4, 3, 42).unwrap();
        for (w, h) in [(1, 1), (11, 3), (2, 17)] {
            let out = resize_bilinear(&img, w, h).unwrap();
            assert_eq!(out.channels(), 3);
            assert!(out.data().iter().all(|&v| v == 42));
        }
    }

    #[test]
    fn resize_hand_bilinear() {
        let img = ImageBuffer::from_raw(2, 1, 1, vec![0, 255]).unwrap();
        assert_eq!(resize_bilinear(&img, 4, 1).unwrap().data(), &[0, 64, 191, 255]);
    }

    #[test]
    fn resize_rejects_zero() {
        let img = ImageBuffer::filled(2, 2, 1, 1).unwrap();
        assert!(resize_bilinear(&img, 0, 3).is_err());
    }

    #[test]
    fn crop_axis_aligned_equals_subimage() {
        let mut rng = StdRng::seed_from_u64(2);
        let img = random_image(&mut rng, 30, 20);
        // corners (4,3) .. (16,11)
        let bbox = RotatedBox::new(10.0, 7.0, 12.0, 8.0, 0.0, 1.0);
        let crop = crop_rotated(&img, &bbox, 12, 8).unwrap();
        assert_eq!(crop, img.subimage(4, 3, 12, 8).unwrap());
    }

    #[test]
    fn crop_half_turn_flips() {
        let mut rng = StdRng::seed_from_u64(4);
        let img = random_image(&mut rng, 20, 20);
        let bbox = RotatedBox { cx: 10.0, cy: 9.0, w: 8.0, h: 6.0, angle: PI, score: 1.0 };
        let crop = crop_rotated(&img, &bbox, 8, 6).unwrap();
        let sub = img.subimage(6, 6, 8, 6).unwrap();
        for v in 0..6 {
            for u in 0..8 {
                assert_eq!(crop.at(u, v), sub.at(7 - u, 5 - v));
            }
        }
    }

    #[test]
    fn crop_half_turn_of_symmetric_pattern() {
        // point-symmetric pattern about (10, 10)
        let img = ImageBuffer::from_fn(20, 20, |x, y| ((x as i64 - 10).abs() * 9 + (y as i64 - 10).abs() * 23) as u8)
            .unwrap();
        let bbox = RotatedBox::new(10.5, 10.5, 9.0, 5.0, PI, 1.0);
        let crop = crop_rotated(&img, &bbox, 9, 5).unwrap();
        let sub = img.subimage(6, 8, 9, 5).unwrap();
        for v in 0..5 {
            for u in 0..9 {
                assert_eq!(crop.at(u, v), sub.at(8 - u, 4 - v));
            }
        }
    }

    #[test]
    fn crop_outside_reads_zero() {
        let img = ImageBuffer::filled(10, 10, 1, 200).unwrap();
        let bbox = RotatedBox::new(10.0, 5.0, 8.0, 4.0, 0.0, 1.0);
        let crop = crop_rotated(&img, &bbox, 8, 4).unwrap();
        for v in 0..4 {
            for u in 0..8 {
                assert_eq!(crop.at(u, v), if u < 4 { 200 } else { 0 });
            }
        }
    }

    #[test]
    fn crop_quarter_turn_transposes() {
        let mut rng = StdRng::seed_from_u64(8);
        let img = random_image(&mut rng, 16, 16);
        let bbox = RotatedBox { cx: 8.0, cy: 8.0, w: 6.0, h: 4.0, angle: PI / 2.0, score: 1.0 };
        let crop = crop_rotated(&img, &bbox, 6, 4).unwrap();
        // width axis points down the image, height axis points left
        for v in 0..4 {
            for u in 0..6 {
                assert_eq!(crop.at(u, v), img.at(9 - v, 5 + u));
            }
        }
    }

    #[test]
    fn crop_rejects_degenerate() {
        let img = ImageBuffer::filled(4, 4, 1, 0).unwrap();
        let bbox = RotatedBox { cx: 2.0, cy: 2.0, w: 0.0, h: 2.0, angle: 0.0, score: 0.5 };
        assert!(crop_rotated(&img, &bbox, 2, 2).is_err());
        let ok = RotatedBox::new(2.0, 2.0, 2.0, 2.0, 0.0, 0.5);
        assert!(crop_rotated(&img, &ok, 0, 2).is_err());
    }
}
