//! Greedy and locality-aware non-maximum suppression over rotated boxes.

use super::geometry::{bounds_of, clip_convex, polygon_area, Point, RotatedBox};

/// Box with cached corners, bounds and area for repeated IoU queries.
struct Prepared {
    corners: [Point; 4],
    bounds: (f64, f64, f64, f64),
    area: f64,
    key: [f64; 5],
}

impl Prepared {
    fn new(b: &RotatedBox) -> Self {
        let corners = b.corners();
        Self { bounds: bounds_of(&corners), corners, area: b.area(), key: [b.cx, b.cy, b.w, b.h, b.angle] }
    }

    fn iou(&self, other: &Prepared) -> f64 {
        let (a, b) = (self.bounds, other.bounds);
        if a.2 <= b.0 || b.2 <= a.0 || a.3 <= b.1 || b.3 <= a.1 {
            return 0.0;
        }
        // same clip order as geometry::intersection_area
        let self_first = self.key.iter().zip(&other.key).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne())
            != Some(std::cmp::Ordering::Greater);
        let inter = if self_first {
            polygon_area(&clip_convex(&self.corners, &other.corners))
        } else {
            polygon_area(&clip_convex(&other.corners, &self.corners))
        };
        let union = self.area + other.area - inter;
        if union <= 0.0 {
            0.0
        } else {
            (inter / union).clamp(0.0, 1.0)
        }
    }
}

/// Greedy NMS: visit boxes by descending score (ties keep input order) and
/// keep a box iff its IoU with every kept box is at most `iou_threshold`.
/// Output is in acceptance order.
pub fn nms_standard(boxes: &[RotatedBox], iou_threshold: f64) -> Vec<RotatedBox> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| boxes[b].score.total_cmp(&boxes[a].score));
    let mut kept: Vec<Prepared> = Vec::new();
    let mut out = Vec::new();
    for i in order {
        let candidate = Prepared::new(&boxes[i]);
        if kept.iter().all(|k| k.iou(&candidate) <= iou_threshold) {
            kept.push(candidate);
            out.push(boxes[i]);
        }
    }
    out
}

/// Score-weighted average of two boxes' corners, refit to a rectangle.
/// The merged score is the larger of the two.
pub fn merge_weighted(a: &RotatedBox, b: &RotatedBox) -> RotatedBox {
    let ca = a.corners();
    let cb = aligned_corners(&ca, &b.corners());
    let (wa, wb) = (a.score, b.score);
    let total = wa + wb;
    let (wa, wb) = if total > 0.0 { (wa / total, wb / total) } else { (0.5, 0.5) };
    let q: [Point; 4] = std::array::from_fn(|i| Point::new(wa * ca[i].x + wb * cb[i].x, wa * ca[i].y + wb * cb[i].y));
    let cx = q.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = q.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let width_vec = Point::new((q[1].x - q[0].x + q[2].x - q[3].x) / 2.0, (q[1].y - q[0].y + q[2].y - q[3].y) / 2.0);
    let height_vec = Point::new((q[3].x - q[0].x + q[2].x - q[1].x) / 2.0, (q[3].y - q[0].y + q[2].y - q[1].y) / 2.0);
    let w = width_vec.x.hypot(width_vec.y);
    let h = height_vec.x.hypot(height_vec.y);
    let angle = width_vec.y.atan2(width_vec.x);
    RotatedBox::new(cx, cy, w, h, angle, a.score.max(b.score))
}

/// Cyclic rotation of `other` whose corners best line up with `reference`,
/// so boxes whose canonical angles fall on opposite sides of ±π/2 still
/// average corner-to-corner.
fn aligned_corners(reference: &[Point; 4], other: &[Point; 4]) -> [Point; 4] {
    let cost = |shift: usize| -> f64 {
        (0..4)
            .map(|i| {
                let p = other[(i + shift) % 4];
                (p.x - reference[i].x).powi(2) + (p.y - reference[i].y).powi(2)
            })
            .sum()
    };
    let best = (0..4).min_by(|&a, &b| cost(a).total_cmp(&cost(b))).unwrap_or(0);
    std::array::from_fn(|i| other[(i + best) % 4])
}

/// Locality-aware NMS: one pass over boxes in row-major emission order,
/// merging each box into the running "last" box while their IoU exceeds the
/// threshold, then standard NMS over the flushed pool.
pub fn nms_locality_aware(boxes: &[RotatedBox], iou_threshold: f64) -> Vec<RotatedBox> {
    let mut pool: Vec<RotatedBox> = Vec::new();
    let mut last: Option<(RotatedBox, Prepared)> = None;
    for b in boxes {
        let current = Prepared::new(b);
        last = match last.take() {
            Some((prev, prev_prepared)) if prev_prepared.iou(&current) > iou_threshold => {
                let merged = merge_weighted(&prev, b);
                let prepared = Prepared::new(&merged);
                Some((merged, prepared))
            }
            Some((prev, _)) => {
                pool.push(prev);
                Some((*b, current))
            }
            None => Some((*b, current)),
        };
    }
    if let Some((prev, _)) = last {
        pool.push(prev);
    }
    nms_standard(&pool, iou_threshold)
}
