//! Detection and plate-reading scores against labelled frames.

use std::path::Path;

use serde::Serialize;

use crate::detector::{iou_rotated, load_geometry_map, load_score_map, RotatedBox};
use crate::imaging::{load_pnm, to_grayscale};
use crate::pipeline::{detect_plates, read_plate, Backend, FrameDetector, PipelineConfig, PipelineError};
use crate::recognizer::TemplateLibrary;
use crate::synth::{Truth, TruthPlate};

pub const DEFAULT_MATCH_IOU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub plates_total: usize,
    /// Labelled plates matched by a box whose text equals the label.
    pub plates_correct: usize,
    pub plate_accuracy: f64,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Greedy one-to-one matching: pairs with IoU ≥ `min_iou` are taken in
/// descending IoU order, each box used at most once. Returns
/// `(prediction index, truth index)` pairs.
pub fn match_boxes(predicted: &[RotatedBox], truth: &[RotatedBox], min_iou: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, p) in predicted.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let iou = iou_rotated(p, t);
            if iou >= min_iou {
                pairs.push((iou, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = vec![false; predicted.len()];
    let mut used_t = vec![false; truth.len()];
    let mut out = Vec::new();
    for (_, i, j) in pairs {
        if !used_p[i] && !used_t[j] {
            used_p[i] = true;
            used_t[j] = true;
            out.push((i, j));
        }
    }
    out
}

/// Scores `predicted` against `truth`, frame by frame. A frame missing from
/// `predicted` counts as having no detections; frames only in `predicted`
/// contribute false positives.
pub fn evaluate(predicted: &Truth, truth: &Truth, min_iou: f64) -> EvalReport {
    let (mut tp, mut fp, mut fneg, mut total, mut correct) = (0, 0, 0, 0, 0);
    let empty = Vec::new();
    let frames = truth.keys().chain(predicted.keys().filter(|k| !truth.contains_key(*k)));
    for frame in frames {
        let t: &Vec<TruthPlate> = truth.get(frame).unwrap_or(&empty);
        let p: &Vec<TruthPlate> = predicted.get(frame).unwrap_or(&empty);
        let tb: Vec<RotatedBox> = t.iter().map(|x| x.bbox.to_rotated(1.0)).collect();
        let pb: Vec<RotatedBox> = p.iter().map(|x| x.bbox.to_rotated(1.0)).collect();
        let matches = match_boxes(&pb, &tb, min_iou);
        tp += matches.len();
        fp += pb.len() - matches.len();
        fneg += tb.len() - matches.len();
        total += t.len();
        correct += matches.iter().filter(|&&(i, j)| p[i].text == t[j].text).count();
    }
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    EvalReport {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fneg,
        precision,
        recall,
        f_score: f_score(precision, recall),
        plates_total: total,
        plates_correct: correct,
        plate_accuracy: ratio(correct, total),
    }
}

pub fn load_truth(path: impl AsRef<Path>) -> Result<Truth, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Source(format!("truth file: {e}")))
}

/// Runs detection and recognition over the labelled frames in `frames_dir`.
///
/// Every detected box is reported; its text is the read when it passes the
/// format and confidence gates, and empty otherwise.
pub fn predict_frames(
    frames_dir: &Path,
    frame_names: impl IntoIterator<Item = String>,
    backend: &Backend,
    lib: &TemplateLibrary,
    cfg: &PipelineConfig,
) -> Result<Truth, PipelineError> {
    let mut out = Truth::new();
    for name in frame_names {
        let path = frames_dir.join(&name);
        let img = to_grayscale(&load_pnm(&path)?);
        let boxes = match backend {
            Backend::Heuristic => detect_plates(&img, FrameDetector::Heuristic, &cfg.detector)?,
            Backend::EastMaps { map_dir } => {
                let (s, g) = Backend::map_paths(map_dir.as_deref().unwrap_or(frames_dir), &path);
                let (score, geometry) = (load_score_map(s)?, load_geometry_map(g)?);
                detect_plates(&img, FrameDetector::Maps { score: &score, geometry: &geometry }, &cfg.detector)?
            }
        };
        let mut plates = Vec::new();
        for b in &boxes {
            let (read, ok) = read_plate(&img, b, lib, cfg)?;
            plates.push(TruthPlate { text: if ok { read.text } else { String::new() }, bbox: b.into() });
        }
        out.insert(name, plates);
    }
    Ok(out)
}
