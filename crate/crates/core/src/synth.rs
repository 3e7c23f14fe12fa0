//! Synthetic plates, frames, EAST maps and labelled corpora for tests,
//! benchmarks and offline evaluation.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::detector::{
    save_geometry_map, save_score_map, BoxRecord, DetectorError, GeometryMap, Point, RotatedBox, ScoreMap,
    DEFAULT_STRIDE,
};
use crate::font;
use crate::imaging::{save_pnm, ImageBuffer, ImageError};

/// Plate appearance. Sizes are in pixels; `scale` is the size of one font cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateStyle {
    pub scale: usize,
    pub gap: usize,
    pub margin: usize,
    pub background: u8,
    pub ink: u8,
}

impl Default for PlateStyle {
    fn default() -> Self {
        Self { scale: 3, gap: 3, margin: 6, background: 255, ink: 0 }
    }
}

impl PlateStyle {
    pub fn plate_size(&self, text: &str) -> (usize, usize) {
        (
            font::text_width(text, self.scale, self.gap) + 2 * self.margin,
            font::GLYPH_ROWS * self.scale + 2 * self.margin,
        )
    }
}

/// Adds rounded N(0, sigma²) noise to every sample, saturating at 0/255.
pub fn add_gaussian_noise<R: Rng + ?Sized>(img: &mut ImageBuffer, sigma: f64, rng: &mut R) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    for v in img.data_mut() {
        *v = (*v as f64 + normal.sample(rng)).round().clamp(0.0, 255.0) as u8;
    }
}

/// Renders `text` as a grayscale plate with optional additive noise.
pub fn render_plate<R: Rng + ?Sized>(
    text: &str,
    style: &PlateStyle,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<ImageBuffer, ImageError> {
    let (w, h) = style.plate_size(text);
    let mut img = ImageBuffer::filled(w, h, 1, style.background)?;
    font::draw_text(&mut img, text, style.margin, style.margin, style.scale, style.gap, style.ink);
    add_gaussian_noise(&mut img, noise_sigma, rng);
    Ok(img)
}

/// Random string matching `^[A-Z]{2}[0-9]{1,2}[A-Z]{1,2}[0-9]{4}$`.
pub fn random_plate_text<R: Rng + ?Sized>(rng: &mut R) -> String {
    const LETTERS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ";
    const DIGITS: &[u8] = b"0123456789";
    let mut s = String::new();
    let mut push = |set: &[u8], n: usize, rng: &mut R| {
        for _ in 0..n {
            s.push(*set.choose(rng).expect("non-empty set") as char);
        }
    };
    push(LETTERS, 2, rng);
    let n = rng.random_range(1..=2);
    push(DIGITS, n, rng);
    let n = rng.random_range(1..=2);
    push(LETTERS, n, rng);
    push(DIGITS, 4, rng);
    s
}

/// A plate to draw into a frame, centred at `(cx, cy)` and rotated by `angle`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedPlate {
    pub text: String,
    pub cx: f64,
    pub cy: f64,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpec {
    pub width: usize,
    pub height: usize,
    pub background: u8,
    pub noise_sigma: f64,
    /// Draw a darker vehicle-body rectangle behind each plate.
    pub vehicle_body: bool,
    pub style: PlateStyle,
    pub plates: Vec<PlacedPlate>,
}

impl FrameSpec {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            background: 128,
            noise_sigma: 3.0,
            vehicle_body: true,
            style: PlateStyle::default(),
            plates: Vec::new(),
        }
    }
}

/// Draws a frame and returns it with the exact box of every plate.
pub fn render_frame<R: Rng + ?Sized>(
    spec: &FrameSpec,
    rng: &mut R,
) -> Result<(ImageBuffer, Vec<RotatedBox>), ImageError> {
    let mut img = ImageBuffer::filled(spec.width, spec.height, 1, spec.background)?;
    let mut boxes = Vec::with_capacity(spec.plates.len());
    for p in &spec.plates {
        let plate = render_plate(&p.text, &spec.style, 0.0, rng)?;
        let bbox = RotatedBox::new(p.cx, p.cy, plate.width() as f64, plate.height() as f64, p.angle, 1.0);
        if spec.vehicle_body {
            let body = RotatedBox { w: bbox.w + 80.0, h: bbox.h * 3.0, ..bbox };
            paint_box(&mut img, &body, |_, _| 60);
        }
        paint_box(&mut img, &bbox, |u, v| {
            let (x, y) = (u.floor() as usize, v.floor() as usize);
            plate.at(x.min(plate.width() - 1), y.min(plate.height() - 1))
        });
        boxes.push(bbox);
    }
    add_gaussian_noise(&mut img, spec.noise_sigma, rng);
    Ok((img, boxes))
}

/// Fills pixels whose centres fall inside `bbox` with `sample(u, v)`, where
/// `(u, v)` are coordinates in the box's own frame with origin at its
/// top-left corner.
fn paint_box(img: &mut ImageBuffer, bbox: &RotatedBox, sample: impl Fn(f64, f64) -> u8) {
    let (x0, y0, x1, y1) = bbox.bounds();
    let (sin, cos) = bbox.angle.sin_cos();
    let xs = (x0.floor().max(0.0) as usize)..(x1.ceil().clamp(0.0, img.width() as f64) as usize);
    let ys = (y0.floor().max(0.0) as usize)..(y1.ceil().clamp(0.0, img.height() as f64) as usize);
    for y in ys {
        for x in xs.clone() {
            let (dx, dy) = (x as f64 + 0.5 - bbox.cx, y as f64 + 0.5 - bbox.cy);
            let u = dx * cos + dy * sin + bbox.w / 2.0;
            let v = -dx * sin + dy * cos + bbox.h / 2.0;
            if (0.0..bbox.w).contains(&u) && (0.0..bbox.h).contains(&v) {
                img.set(x, y, 0, sample(u, v));
            }
        }
    }
}

/// Geometry channels `[top, right, bottom, left, angle]` that make a cell
/// anchored at `anchor` predict `bbox`, or `None` when the anchor lies
/// outside the box.
pub fn geometry_for(bbox: &RotatedBox, anchor: Point) -> Option<[f32; 5]> {
    let (sin, cos) = bbox.angle.sin_cos();
    let (dx, dy) = (anchor.x - bbox.cx, anchor.y - bbox.cy);
    let lx = dx * cos + dy * sin;
    let ly = -dx * sin + dy * cos;
    let d = [bbox.h / 2.0 + ly, bbox.w / 2.0 - lx, bbox.h / 2.0 - ly, bbox.w / 2.0 + lx];
    if d.iter().any(|&v| v < 0.0) {
        return None;
    }
    Some([d[0] as f32, d[1] as f32, d[2] as f32, d[3] as f32, bbox.angle as f32])
}

/// How [`encode_east_maps`] assigns cells to boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellFill {
    /// Only the cell whose anchor is nearest the box centre.
    Center,
    /// Every cell whose anchor lies inside the box (later boxes win).
    Interior,
}

/// Builds score/geometry maps whose decoding reproduces `boxes`.
///
/// Cells set by a box get the box's score (or 1.0 when the box score is 0);
/// all other cells score 0. Boxes with no anchor inside them are skipped
/// in `Interior` mode; in `Center` mode the centre cell is clamped to the
/// map and skipped when its anchor falls outside the box.
pub fn encode_east_maps(
    boxes: &[RotatedBox],
    rows: usize,
    cols: usize,
    stride: u32,
    fill: CellFill,
) -> Result<(ScoreMap, GeometryMap), DetectorError> {
    if stride == 0 || rows == 0 || cols == 0 {
        return Err(DetectorError::Argument("map dimensions and stride must be positive".into()));
    }
    let s = stride as f64;
    let mut scores = vec![0f32; rows * cols];
    let mut geo = vec![0f32; rows * cols * GeometryMap::CHANNELS];
    let mut put = |r: usize, c: usize, g: [f32; 5], score: f64| {
        let i = r * cols + c;
        scores[i] = if score > 0.0 { score as f32 } else { 1.0 };
        geo[i * 5..i * 5 + 5].copy_from_slice(&g);
    };
    for b in boxes {
        match fill {
            CellFill::Center => {
                let r = ((b.cy / s).round().max(0.0) as usize).min(rows - 1);
                let c = ((b.cx / s).round().max(0.0) as usize).min(cols - 1);
                if let Some(g) = geometry_for(b, Point::new(c as f64 * s, r as f64 * s)) {
                    put(r, c, g, b.score);
                }
            }
            CellFill::Interior => {
                let (x0, y0, x1, y1) = b.bounds();
                let c0 = (x0 / s).ceil().max(0.0) as usize;
                let r0 = (y0 / s).ceil().max(0.0) as usize;
                let c1 = ((x1 / s).floor().max(-1.0) + 1.0).min(cols as f64) as usize;
                let r1 = ((y1 / s).floor().max(-1.0) + 1.0).min(rows as f64) as usize;
                for r in r0..r1 {
                    for c in c0..c1 {
                        if let Some(g) = geometry_for(b, Point::new(c as f64 * s, r as f64 * s)) {
                            put(r, c, g, b.score);
                        }
                    }
                }
            }
        }
    }
    Ok((ScoreMap::new(rows, cols, scores)?.with_stride(stride), GeometryMap::new(rows, cols, geo)?.with_stride(stride)))
}

/// Ground truth for one plate in a corpus frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthPlate {
    pub text: String,
    #[serde(rename = "box")]
    pub bbox: BoxRecord,
}

/// Frame filename → plates visible in that frame.
pub type Truth = BTreeMap<String, Vec<TruthPlate>>;

/// Parameters of a drive-by corpus: `plates` vehicles pass the camera one
/// after another, each visible in `frames_per_plate` consecutive frames.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub frames: usize,
    pub plates: usize,
    pub width: usize,
    pub height: usize,
    pub noise_sigma: f64,
    /// Also write `<stem>.score.emap` / `<stem>.geo.emap` per frame.
    pub write_maps: bool,
    pub stride: u32,
    pub style: PlateStyle,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            frames: 100,
            plates: 10,
            width: 640,
            height: 360,
            noise_sigma: 4.0,
            write_maps: false,
            stride: DEFAULT_STRIDE,
            style: PlateStyle { scale: 2, gap: 3, margin: 4, ..PlateStyle::default() },
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub fn frame_name(index: usize) -> String {
    format!("frame_{index:05}.pgm")
}

/// Writes a labelled drive-by corpus into `dir` (frames plus `truth.json`)
/// and returns the truth table and the distinct plate texts in order of
/// appearance.
pub fn generate_corpus<R: Rng + ?Sized>(
    dir: impl AsRef<Path>,
    spec: &CorpusSpec,
    rng: &mut R,
) -> Result<(Truth, Vec<String>), CorpusError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut texts: Vec<String> = Vec::with_capacity(spec.plates);
    while texts.len() < spec.plates {
        let t = random_plate_text(rng);
        if !texts.contains(&t) {
            texts.push(t);
        }
    }
    let per_plate = if spec.plates == 0 { 0 } else { spec.frames.div_ceil(spec.plates) };
    let lanes: Vec<f64> = texts.iter().map(|_| rng.random_range(0.4..0.7) * spec.height as f64).collect();
    let mut truth = Truth::new();
    for i in 0..spec.frames {
        let mut frame = FrameSpec::new(spec.width, spec.height);
        frame.noise_sigma = spec.noise_sigma;
        frame.style = spec.style;
        if per_plate > 0 {
            let k = (i / per_plate).min(spec.plates - 1);
            let step = i - k * per_plate;
            let t = (step as f64 + 0.5) / per_plate as f64;
            let cx = spec.width as f64 * (0.3 + 0.4 * t);
            frame.plates.push(PlacedPlate { text: texts[k].clone(), cx: cx.round(), cy: lanes[k].round(), angle: 0.0 });
        }
        let (img, boxes) = render_frame(&frame, rng)?;
        let name = frame_name(i);
        save_pnm(&img, dir.join(&name))?;
        if spec.write_maps {
            let s = spec.stride as usize;
            let (score, geo) = encode_east_maps(
                &boxes,
                spec.height.div_ceil(s),
                spec.width.div_ceil(s),
                spec.stride,
                CellFill::Interior,
            )?;
            let stem = name.trim_end_matches(".pgm");
            save_score_map(&score, dir.join(format!("{stem}.score.emap")))?;
            save_geometry_map(&geo, dir.join(format!("{stem}.geo.emap")))?;
        }
        let plates =
            frame.plates.iter().zip(&boxes).map(|(p, b)| TruthPlate { text: p.text.clone(), bbox: b.into() }).collect();
        truth.insert(name, plates);
    }
    std::fs::write(dir.join("truth.json"), serde_json::to_string_pretty(&truth)?)?;
    Ok((truth, texts))
}
