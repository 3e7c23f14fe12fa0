//! Frame-by-frame orchestration: detect, crop, recognize, deduplicate and
//! hand sightings to a sink.

mod dedup;
mod sink;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::detector::BoxRecord;
use crate::detector::{
    decode_east, detect_heuristic, filter_plate_candidates, load_geometry_map, load_score_map, nms_locality_aware,
    DetectorConfig, DetectorError, GeometryMap, RotatedBox, ScoreMap,
};
use crate::imaging::{crop_rotated, load_pnm, to_grayscale, ImageBuffer, ImageError};
use crate::recognizer::{recognize_plate, PlateFormat, PlateRead, RecognizeError, RecognizeParams, TemplateLibrary};
pub use dedup::{Deduplicator, DEFAULT_DEDUP_WINDOW_MS};
pub use sink::{replay_journal, Delivery, JournalSink, ReplayReport, SightingSink, SinkError, SpoolingSink, StoreSink};

pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.6;
pub const DEFAULT_CROP_PADDING: f64 = 0.25;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid frame source: {0}")]
    Source(String),
    #[error("missing map {}", .0.display())]
    MissingMap(PathBuf),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Recognize(#[from] RecognizeError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceKind {
    /// Every `.pgm`/`.ppm`/`.pnm` file in the directory, in filename order.
    Directory(PathBuf),
    Single(PathBuf),
}

/// Where frames come from and how they are stamped.
///
/// Frame `i` is stamped `start_ms + round(i * frame_interval_s * 1000)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSource {
    pub kind: SourceKind,
    pub frame_interval_s: f64,
    pub camera_id: String,
    pub start_ms: i64,
}

impl FrameSource {
    /// Validates the interval (at least 1 ms, so stamps strictly increase)
    /// and the camera id. `start_ms` defaults to the current time.
    pub fn new(kind: SourceKind, camera_id: impl Into<String>, frame_interval_s: f64) -> Result<Self> {
        let camera_id = camera_id.into();
        if camera_id.trim().is_empty() {
            return Err(PipelineError::Source("camera id is empty".into()));
        }
        if !(frame_interval_s.is_finite() && frame_interval_s >= 0.001) {
            return Err(PipelineError::Source(format!("frame interval {frame_interval_s} s is below 1 ms")));
        }
        Ok(Self { kind, frame_interval_s, camera_id, start_ms: now_ms() })
    }

    pub fn with_start_ms(mut self, start_ms: i64) -> Self {
        self.start_ms = start_ms;
        self
    }

    pub fn timestamp_ms(&self, frame_index: usize) -> i64 {
        self.start_ms + (frame_index as f64 * self.frame_interval_s * 1000.0).round() as i64
    }

    /// Frame paths in processing order.
    pub fn frames(&self) -> Result<Vec<PathBuf>> {
        match &self.kind {
            SourceKind::Single(p) => Ok(vec![p.clone()]),
            SourceKind::Directory(dir) => {
                let entries =
                    std::fs::read_dir(dir).map_err(|e| PipelineError::Source(format!("{}: {e}", dir.display())))?;
                let mut frames = Vec::new();
                for entry in entries {
                    let path = entry?.path();
                    let is_frame = path
                        .extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "ppm" | "pnm"));
                    if is_frame && path.is_file() {
                        frames.push(path);
                    }
                }
                frames.sort();
                Ok(frames)
            }
        }
    }
}

pub fn now_ms() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as i64).unwrap_or(0)
}

/// Detection backend of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Heuristic,
    /// Precomputed maps `<stem>.score.emap` and `<stem>.geo.emap` per frame,
    /// looked up in `map_dir` or, when unset, next to the frame.
    EastMaps {
        map_dir: Option<PathBuf>,
    },
}

impl Backend {
    pub fn map_paths(map_dir: &Path, frame: &Path) -> (PathBuf, PathBuf) {
        let stem = frame.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        (map_dir.join(format!("{stem}.score.emap")), map_dir.join(format!("{stem}.geo.emap")))
    }
}

/// Per-frame detector input.
#[derive(Debug, Clone, Copy)]
pub enum FrameDetector<'a> {
    Heuristic,
    Maps { score: &'a ScoreMap, geometry: &'a GeometryMap },
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub detector: DetectorConfig,
    pub recognize: RecognizeParams,
    pub plate_format: PlateFormat,
    /// Reads below this mean confidence are discarded.
    pub min_confidence: f64,
    pub dedup_window_ms: i64,
    /// Margin, as a fraction of box height, for the second read attempt of
    /// a box whose tight crop was rejected. See [`read_plate`].
    pub crop_padding: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            detector: DetectorConfig::default(),
            recognize: RecognizeParams::default(),
            plate_format: PlateFormat::default(),
            min_confidence: DEFAULT_MIN_CONFIDENCE,
            dedup_window_ms: DEFAULT_DEDUP_WINDOW_MS,
            crop_padding: DEFAULT_CROP_PADDING,
        }
    }
}

/// One accepted plate read in one frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionRecord {
    pub frame_index: usize,
    pub timestamp_ms: i64,
    #[serde(rename = "box")]
    pub bbox: RotatedBox,
    pub read: PlateRead,
}

/// A deduplicated sighting, in the journal line format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SightingEvent {
    pub plate: String,
    pub camera_id: String,
    pub first_seen_ms: i64,
    pub last_seen_ms: i64,
    pub confidence: f64,
    #[serde(rename = "box")]
    pub bbox: BoxRecord,
    pub client_nonce: String,
}

/// Plate boxes in one frame, after the plate filters.
pub fn detect_plates(img: &ImageBuffer, det: FrameDetector<'_>, cfg: &DetectorConfig) -> Result<Vec<RotatedBox>> {
    match det {
        FrameDetector::Heuristic => Ok(detect_heuristic(img, cfg)?),
        FrameDetector::Maps { score, geometry } => {
            let raw = decode_east(score, geometry, cfg)?;
            let merged = nms_locality_aware(&raw, cfg.nms_iou_threshold);
            Ok(filter_plate_candidates(&merged, img, cfg))
        }
    }
}

/// Crops `bbox` out of `img`, grown by `padding * h` on every side, at one
/// output pixel per box pixel.
pub fn crop_plate(img: &ImageBuffer, bbox: &RotatedBox, padding: f64) -> Result<ImageBuffer> {
    let pad = 2.0 * padding.max(0.0) * bbox.h;
    let grown = RotatedBox { w: bbox.w + pad, h: bbox.h + pad, ..*bbox };
    let out_w = grown.w.round().max(1.0) as usize;
    let out_h = grown.h.round().max(1.0) as usize;
    Ok(crop_rotated(img, &grown, out_w, out_h)?)
}

/// Reads one detected box and reports whether the read passes the format
/// and confidence gates.
///
/// The tight crop is read first. When that read is rejected, the box is read
/// again with `cfg.crop_padding` of margin (edge-based boxes often hug the
/// glyphs, leaving no background above and below them) and the better of the
/// two reads is kept.
pub fn read_plate(
    img: &ImageBuffer,
    bbox: &RotatedBox,
    lib: &TemplateLibrary,
    cfg: &PipelineConfig,
) -> Result<(PlateRead, bool)> {
    let attempt = |padding: f64| -> Result<(PlateRead, bool)> {
        let crop = crop_plate(img, bbox, padding)?;
        let mut read = recognize_plate(&crop, lib, &cfg.recognize)?;
        read.source_box = *bbox;
        let accepted = read.mean_confidence >= cfg.min_confidence && cfg.plate_format.matches(&read.text);
        Ok((read, accepted))
    };
    let first = attempt(0.0)?;
    if first.1 || cfg.crop_padding <= 0.0 {
        return Ok(first);
    }
    let second = attempt(cfg.crop_padding)?;
    if second.1 || second.0.mean_confidence > first.0.mean_confidence {
        Ok(second)
    } else {
        Ok(first)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct StageTimes {
    detect: Duration,
    recognize: Duration,
}

/// Detects, crops and reads the plates of one frame. Only reads that match
/// the plate format with at least `cfg.min_confidence` are returned.
pub fn process_frame(
    img: &ImageBuffer,
    det: FrameDetector<'_>,
    lib: &TemplateLibrary,
    cfg: &PipelineConfig,
    frame_index: usize,
    timestamp_ms: i64,
) -> Result<Vec<DetectionRecord>> {
    process_frame_timed(img, det, lib, cfg, frame_index, timestamp_ms).map(|(r, _)| r)
}

fn process_frame_timed(
    img: &ImageBuffer,
    det: FrameDetector<'_>,
    lib: &TemplateLibrary,
    cfg: &PipelineConfig,
    frame_index: usize,
    timestamp_ms: i64,
) -> Result<(Vec<DetectionRecord>, StageTimes)> {
    let t0 = Instant::now();
    let gray = to_grayscale(img);
    let boxes = detect_plates(&gray, det, &cfg.detector)?;
    let t1 = Instant::now();
    let mut records = Vec::new();
    for bbox in boxes {
        let (read, accepted) = read_plate(&gray, &bbox, lib, cfg)?;
        if accepted {
            records.push(DetectionRecord { frame_index, timestamp_ms, bbox, read });
        } else {
            log::debug!("frame {frame_index}: dropped read {:?} ({:.3})", read.text, read.mean_confidence);
        }
    }
    let times = StageTimes { detect: t1 - t0, recognize: t1.elapsed() };
    Ok((records, times))
}

/// Timing of a run. `fps` counts processed frames only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThroughputReport {
    pub frames_attempted: usize,
    pub frames_errored: usize,
    pub frames_processed: usize,
    pub wall_seconds: f64,
    pub fps: f64,
    /// Mean per processed frame.
    pub detect_ms: f64,
    pub recognize_ms: f64,
}

impl ThroughputReport {
    fn new(attempted: usize, errored: usize, wall: Duration, detect: Duration, recognize: Duration) -> Self {
        let processed = attempted - errored;
        let wall_seconds = wall.as_secs_f64();
        let fps = if processed == 0 || wall_seconds <= 0.0 { 0.0 } else { processed as f64 / wall_seconds };
        let per_frame = |d: Duration| if processed == 0 { 0.0 } else { d.as_secs_f64() * 1000.0 / processed as f64 };
        Self {
            frames_attempted: attempted,
            frames_errored: errored,
            frames_processed: processed,
            wall_seconds,
            fps,
            detect_ms: per_frame(detect),
            recognize_ms: per_frame(recognize),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameError {
    pub frame: PathBuf,
    pub message: String,
}

/// Everything a run produced.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub report: ThroughputReport,
    /// Emitted sightings, nondecreasing in `first_seen_ms`.
    pub sightings: Vec<SightingEvent>,
    pub stored: usize,
    pub spooled: usize,
    /// Sightings the sink refused outright.
    pub failed: usize,
    pub frame_errors: Vec<FrameError>,
}

/// Processes every frame of `source` in order and delivers each sighting to
/// `sink` as soon as the deduplicator releases it.
///
/// Per-frame failures (unreadable image, missing maps) are counted and the
/// run continues; so are sink failures. Only an unreadable source is fatal.
pub fn run(
    source: &FrameSource,
    backend: &Backend,
    lib: &TemplateLibrary,
    cfg: &PipelineConfig,
    sink: &mut dyn SightingSink,
) -> Result<RunOutcome> {
    cfg.detector.validate()?;
    let frames = source.frames()?;
    let started = Instant::now();
    let mut dedup = Deduplicator::new(cfg.dedup_window_ms);
    let mut outcome = RunOutcome {
        report: ThroughputReport::new(0, 0, Duration::ZERO, Duration::ZERO, Duration::ZERO),
        sightings: Vec::new(),
        stored: 0,
        spooled: 0,
        failed: 0,
        frame_errors: Vec::new(),
    };
    let mut totals = StageTimes::default();

    for (index, path) in frames.iter().enumerate() {
        let ts = source.timestamp_ms(index);
        match run_frame(path, backend, lib, cfg, index, ts) {
            Ok((records, times)) => {
                totals.detect += times.detect;
                totals.recognize += times.recognize;
                for rec in &records {
                    for ev in dedup.push(&source.camera_id, rec) {
                        emit(ev, sink, &mut outcome);
                    }
                }
            }
            Err(e) => {
                log::warn!("{}: {e}", path.display());
                outcome.frame_errors.push(FrameError { frame: path.clone(), message: e.to_string() });
            }
        }
    }
    for ev in dedup.flush() {
        emit(ev, sink, &mut outcome);
    }
    outcome.report = ThroughputReport::new(
        frames.len(),
        outcome.frame_errors.len(),
        started.elapsed(),
        totals.detect,
        totals.recognize,
    );
    Ok(outcome)
}

fn run_frame(
    path: &Path,
    backend: &Backend,
    lib: &TemplateLibrary,
    cfg: &PipelineConfig,
    index: usize,
    ts: i64,
) -> Result<(Vec<DetectionRecord>, StageTimes)> {
    let img = load_pnm(path)?;
    match backend {
        Backend::Heuristic => process_frame_timed(&img, FrameDetector::Heuristic, lib, cfg, index, ts),
        Backend::EastMaps { map_dir } => {
            let dir = map_dir.as_deref().or_else(|| path.parent()).unwrap_or(Path::new("."));
            let (score_path, geo_path) = Backend::map_paths(dir, path);
            for p in [&score_path, &geo_path] {
                if !p.is_file() {
                    return Err(PipelineError::MissingMap(p.clone()));
                }
            }
            let score = load_score_map(&score_path)?;
            let geometry = load_geometry_map(&geo_path)?;
            process_frame_timed(&img, FrameDetector::Maps { score: &score, geometry: &geometry }, lib, cfg, index, ts)
        }
    }
}

fn emit(ev: SightingEvent, sink: &mut dyn SightingSink, outcome: &mut RunOutcome) {
    match sink.deliver(&ev) {
        Ok(Delivery::Stored { .. }) => outcome.stored += 1,
        Ok(Delivery::Spooled) => outcome.spooled += 1,
        Err(e) => {
            log::warn!("sighting {} not delivered: {e}", ev.client_nonce);
            outcome.failed += 1;
        }
    }
    outcome.sightings.push(ev);
}
