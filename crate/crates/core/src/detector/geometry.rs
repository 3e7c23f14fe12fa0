//! Oriented rectangles, convex polygon clipping and rotated IoU.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn distance(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    /// Rotates `self` by `angle` radians about `center`.
    pub fn rotated_about(self, center: Point, angle: f64) -> Point {
        let (sin, cos) = angle.sin_cos();
        let d = self.sub(center);
        Point::new(center.x + d.x * cos - d.y * sin, center.y + d.x * sin + d.y * cos)
    }
}

/// Unscored box as it appears in JSON documents (journals, truth files).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub angle: f64,
}

impl From<&RotatedBox> for BoxRecord {
    fn from(b: &RotatedBox) -> Self {
        Self { cx: b.cx, cy: b.cy, w: b.w, h: b.h, angle: b.angle }
    }
}

impl BoxRecord {
    pub fn to_rotated(&self, score: f64) -> RotatedBox {
        RotatedBox::new(self.cx, self.cy, self.w, self.h, self.angle, score)
    }
}

/// A scored oriented rectangle in image-pixel coordinates.
///
/// `w` runs along the direction `(cos angle, sin angle)`, `h` along
/// `(-sin angle, cos angle)`. Boxes built through [`RotatedBox::new`] carry an
/// angle in `(-π/2, π/2]` and a score clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatedBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub angle: f64,
    pub score: f64,
}

impl RotatedBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, angle: f64, score: f64) -> Self {
        Self { cx, cy, w, h, angle: normalize_angle(angle), score: score.clamp(0.0, 1.0) }
    }

    /// Axis-aligned box from `[x0, x1] × [y0, y1]`.
    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64, score: f64) -> Self {
        Self::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0, 0.0, score)
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && self.w.is_finite() && self.h.is_finite() && (0.0..=1.0).contains(&self.score)
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn aspect(&self) -> f64 {
        self.w / self.h
    }

    /// Corners in positive (counter-clockwise in a y-up frame) shoelace order,
    /// starting at the `(-w/2, -h/2)` local corner.
    pub fn corners(&self) -> [Point; 4] {
        let (sin, cos) = self.angle.sin_cos();
        let (hw, hh) = (self.w / 2.0, self.h / 2.0);
        [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)]
            .map(|(lx, ly)| Point::new(self.cx + lx * cos - ly * sin, self.cy + lx * sin + ly * cos))
    }

    /// Whether `p` lies inside or on the boundary.
    pub fn contains(&self, p: Point) -> bool {
        let (sin, cos) = self.angle.sin_cos();
        let (dx, dy) = (p.x - self.cx, p.y - self.cy);
        let lx = dx * cos + dy * sin;
        let ly = -dx * sin + dy * cos;
        lx.abs() <= self.w / 2.0 && ly.abs() <= self.h / 2.0
    }

    /// Axis-aligned bounds `(x0, y0, x1, y1)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        bounds_of(&self.corners())
    }
}

/// Maps an angle into `(-π/2, π/2]`; a rectangle turned by π is the same rectangle.
pub fn normalize_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(PI);
    if a > FRAC_PI_2 {
        a - PI
    } else {
        a
    }
}

pub(crate) fn bounds_of(points: &[Point]) -> (f64, f64, f64, f64) {
    points.iter().fold((f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY), |b, p| {
        (b.0.min(p.x), b.1.min(p.y), b.2.max(p.x), b.3.max(p.y))
    })
}

/// Signed shoelace area; positive for the corner order [`RotatedBox::corners`] yields.
pub fn signed_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

pub fn polygon_area(poly: &[Point]) -> f64 {
    signed_area(poly).abs()
}

/// Sutherland–Hodgman: clips `subject` against the convex, positively
/// oriented polygon `clip`.
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output: Vec<Point> = subject.to_vec();
    let mut input: Vec<Point> = Vec::with_capacity(subject.len() + clip.len());
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let (e0, e1) = (clip[i], clip[(i + 1) % clip.len()]);
        let edge = e1.sub(e0);
        std::mem::swap(&mut input, &mut output);
        output.clear();
        let side = |p: Point| edge.cross(p.sub(e0));
        let mut prev = *input.last().unwrap();
        let mut prev_side = side(prev);
        for &cur in input.iter() {
            let cur_side = side(cur);
            if cur_side >= 0.0 {
                if prev_side < 0.0 {
                    output.push(intersect(prev, cur, prev_side, cur_side));
                }
                output.push(cur);
            } else if prev_side >= 0.0 {
                output.push(intersect(prev, cur, prev_side, cur_side));
            }
            prev = cur;
            prev_side = cur_side;
        }
    }
    output
}

fn intersect(a: Point, b: Point, side_a: f64, side_b: f64) -> Point {
    let t = side_a / (side_a - side_b);
    Point::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t)
}

/// Area of the intersection of two oriented rectangles.
pub fn intersection_area(a: &RotatedBox, b: &RotatedBox) -> f64 {
    // clip in a fixed order so that the result is exactly symmetric
    let (first, second) = if box_key_le(a, b) { (a, b) } else { (b, a) };
    polygon_area(&clip_convex(&first.corners(), &second.corners()))
}

fn box_key_le(a: &RotatedBox, b: &RotatedBox) -> bool {
    let ka = [a.cx, a.cy, a.w, a.h, a.angle];
    let kb = [b.cx, b.cy, b.w, b.h, b.angle];
    for (x, y) in ka.iter().zip(&kb) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    true
}

/// Intersection over union of two oriented rectangles, in `[0, 1]`.
pub fn iou_rotated(a: &RotatedBox, b: &RotatedBox) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.bounds();
    let (bx0, by0, bx1, by1) = b.bounds();
    if ax1 <= bx0 || bx1 <= ax0 || ay1 <= by0 || by1 <= ay0 {
        return 0.0;
    }
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}
