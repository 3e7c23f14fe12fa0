//! Classical plate localization: vertical edges, Otsu, horizontal closing,
//! connected components, then the plate filters.

use super::{filter_plate_candidates, DetectorConfig, Result, RotatedBox};
use crate::imaging::{label_components, otsu_threshold, to_grayscale, ImageBuffer};

/// Magnitude of the horizontal Sobel derivative (responds to vertical
/// edges), scaled by 1/4 into 0..=255, clamp-to-edge borders.
pub fn sobel_vertical_edges(gray: &ImageBuffer) -> ImageBuffer {
    let (w, h) = (gray.width(), gray.height());
    let src = gray.data();
    let px = |x: isize, y: isize| -> i32 {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        src[y * w + x] as i32
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (px(x + 1, y - 1) - px(x - 1, y - 1))
                + 2 * (px(x + 1, y) - px(x - 1, y))
                + (px(x + 1, y + 1) - px(x - 1, y + 1));
            out.push((gx.abs() / 4).min(255) as u8);
        }
    }
    ImageBuffer::from_raw(w, h, 1, out).expect("same shape as input")
}

/// Binary closing with a `1 × width` element; the window is clipped at the
/// image border.
fn close_horizontal(mask: &[bool], w: usize, h: usize, width: usize) -> Vec<bool> {
    let r = width / 2;
    let run = |src: &[bool], want: bool| -> Vec<bool> {
        // dilation (want=true): any set in window; erosion (want=false): all set
        let mut out = vec![false; src.len()];
        for y in 0..h {
            let row = &src[y * w..(y + 1) * w];
            let mut prefix = vec![0usize; w + 1];
            for x in 0..w {
                prefix[x + 1] = prefix[x] + row[x] as usize;
            }
            for x in 0..w {
                let lo = x.saturating_sub(r);
                let hi = (x + r + 1).min(w);
                let set = prefix[hi] - prefix[lo];
                out[y * w + x] = if want { set > 0 } else { set == hi - lo };
            }
        }
        out
    };
    let dilated = run(mask, true);
    run(&dilated, false)
}

/// Edge/contour plate detector over a single frame.
///
/// Each surviving component becomes an axis-aligned box scored by the
/// fraction of its bounding box covered by its own edge pixels. Results pass
/// through [`filter_plate_candidates`] and are sorted by score, descending.
pub fn detect_heuristic(img: &ImageBuffer, cfg: &DetectorConfig) -> Result<Vec<RotatedBox>> {
    cfg.validate()?;
    let gray = to_grayscale(img);
    let (w, h) = (gray.width(), gray.height());
    let edges = sobel_vertical_edges(&gray);
    let threshold = otsu_threshold(&edges.histogram()).max(cfg.min_edge_magnitude);
    let edge_mask: Vec<bool> = edges.data().iter().map(|&v| v > threshold).collect();
    let closed = close_horizontal(&edge_mask, w, h, cfg.closing_width);
    let labeling = label_components(&closed, w, h);

    let mut edge_counts = vec![0usize; labeling.components.len()];
    for (i, &is_edge) in edge_mask.iter().enumerate() {
        if is_edge {
            let label = labeling.labels[i];
            edge_counts[label as usize - 1] += 1;
        }
    }

    let candidates: Vec<RotatedBox> = labeling
        .components
        .iter()
        .zip(&edge_counts)
        .map(|(c, &edges)| {
            let area = (c.width() * c.height()) as f64;
            RotatedBox::from_corners(c.x0 as f64, c.y0 as f64, c.x1 as f64, c.y1 as f64, edges as f64 / area)
        })
        .collect();
    let mut boxes = filter_plate_candidates(&candidates, &gray, cfg);
    boxes.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(boxes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closing_fills_short_gaps_only() {
        let row: Vec<bool> = "##....##..........##".bytes().map(|b| b == b'#').collect();
        let closed = close_horizontal(&row, row.len(), 1, 9);
        let text: String = closed.iter().map(|&b| if b { '#' } else { '.' }).collect();
        assert_eq!(text, "########..........##");
    }

    #[test]
    fn sobel_flat_is_zero() {
        let img = ImageBuffer::filled(10, 10, 1, 90).unwrap();
        assert!(sobel_vertical_edges(&img).data().iter().all(|&v| v == 0));
    }

    #[test]
    fn sobel_step_edge() {
        let img = ImageBuffer::from_fn(6, 3, |x, _| if x < 3 { 0 } else { 200 }).unwrap();
        let e = sobel_vertical_edges(&img);
        assert_eq!(e.at(2, 1), 200);
        assert_eq!(e.at(3, 1), 200);
        assert_eq!(e.at(0, 1), 0);
        assert_eq!(e.at(5, 1), 0);
    }

    #[test]
    fn uniform_image_has_no_plates() {
        let img = ImageBuffer::filled(64, 48, 1, 128).unwrap();
        assert!(detect_heuristic(&img, &DetectorConfig::default()).unwrap().is_empty());
    }
}
