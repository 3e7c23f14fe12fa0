//! Collapsing repeated reads of one plate into sightings.

use std::collections::{HashMap, VecDeque};

use super::{BoxRecord, DetectionRecord, SightingEvent};

pub const DEFAULT_DEDUP_WINDOW_MS: i64 = 5_000;

struct Slot {
    event: SightingEvent,
    closed: bool,
}

/// Streaming deduplicator for one camera's records.
///
/// A record extends the open sighting with the same camera and text when it
/// arrives no more than `window_ms` after that sighting's last read;
/// otherwise it opens a new sighting. Closed sightings are released in
/// order of `first_seen`, so a long-lived sighting holds back later ones
/// until it closes or [`Deduplicator::flush`] is called.
pub struct Deduplicator {
    window_ms: i64,
    open: HashMap<(String, String), usize>,
    queue: VecDeque<Slot>,
    /// Absolute index of `queue[0]`.
    base: usize,
}

impl Deduplicator {
    pub fn new(window_ms: i64) -> Self {
        Self { window_ms: window_ms.max(0), open: HashMap::new(), queue: VecDeque::new(), base: 0 }
    }

    pub fn window_ms(&self) -> i64 {
        self.window_ms
    }

    /// Feeds one record (timestamps must be nondecreasing) and returns the
    /// sightings that became final.
    pub fn push(&mut self, camera_id: &str, rec: &DetectionRecord) -> Vec<SightingEvent> {
        let t = rec.timestamp_ms;
        let window = self.window_ms;
        let (queue, base) = (&mut self.queue, self.base);
        self.open.retain(|_, &mut idx| {
            let slot = &mut queue[idx - base];
            if t - slot.event.last_seen_ms > window {
                slot.closed = true;
                false
            } else {
                true
            }
        });

        let key = (camera_id.to_string(), rec.read.text.clone());
        let confidence = rec.read.mean_confidence;
        match self.open.get(&key) {
            Some(&idx) => {
                let ev = &mut self.queue[idx - self.base].event;
                ev.last_seen_ms = ev.last_seen_ms.max(t);
                if confidence > ev.confidence {
                    ev.confidence = confidence;
                    ev.bbox = BoxRecord::from(&rec.bbox);
                }
            }
            None => {
                let event = SightingEvent {
                    plate: rec.read.text.clone(),
                    camera_id: camera_id.to_string(),
                    first_seen_ms: t,
                    last_seen_ms: t,
                    confidence,
                    bbox: BoxRecord::from(&rec.bbox),
                    client_nonce: format!("{camera_id}-{}-{t}", rec.read.text),
                };
                self.open.insert(key, self.base + self.queue.len());
                self.queue.push_back(Slot { event, closed: false });
            }
        }
        self.release()
    }

    /// Closes every open sighting and returns everything not yet released.
    pub fn flush(&mut self) -> Vec<SightingEvent> {
        self.open.clear();
        for s in &mut self.queue {
            s.closed = true;
        }
        self.release()
    }

    fn release(&mut self) -> Vec<SightingEvent> {
        let mut out = Vec::new();
        while self.queue.front().is_some_and(|s| s.closed) {
            out.push(self.queue.pop_front().expect("front exists").event);
            self.base += 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::RotatedBox;
    use crate::recognizer::PlateRead;

    fn rec(text: &str, t_s: f64, conf: f64) -> DetectionRecord {
        let bbox = RotatedBox::from_corners(0.0, 0.0, 10.0, 4.0, 1.0);
        DetectionRecord {
            frame_index: 0,
            timestamp_ms: (t_s * 1000.0) as i64,
            bbox,
            read: PlateRead {
                text: text.into(),
                char_confidences: vec![conf],
                source_box: bbox,
                mean_confidence: conf,
            },
        }
    }

    fn run(records: &[DetectionRecord]) -> Vec<SightingEvent> {
        let mut d = Deduplicator::new(DEFAULT_DEDUP_WINDOW_MS);
        let mut out: Vec<SightingEvent> = records.iter().flat_map(|r| d.push("cam", r)).collect();
        out.extend(d.flush());
        out
    }

    #[test]
    fn within_window_merges() {
        let out = run(&[rec("AB", 0.0, 0.7), rec("AB", 2.0, 0.9)]);
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].first_seen_ms, out[0].last_seen_ms), (0, 2000));
        assert_eq!(out[0].confidence, 0.9);
    }

    #[test]
    fn gap_opens_new_sighting() {
        let out = run(&[rec("AB", 0.0, 0.7), rec("AB", 10.0, 0.7)]);
        assert_eq!(out.len(), 2);
        assert_ne!(out[0].client_nonce, out[1].client_nonce);
    }

    #[test]
    fn window_measured_from_last_read() {
        let out = run(&[rec("AB", 0.0, 0.7), rec("AB", 4.0, 0.7), rec("AB", 8.0, 0.7), rec("AB", 13.5, 0.7)]);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].last_seen_ms, 8000);
    }

    #[test]
    fn interleaved_plates_independent() {
        let out = run(&[rec("AB", 0.0, 0.7), rec("CD", 1.0, 0.7), rec("AB", 2.0, 0.7), rec("CD", 3.0, 0.7)]);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].plate, "AB");
        assert_eq!(out[1].plate, "CD");
    }

    #[test]
    fn release_order_follows_first_seen() {
        // AB stays open while CD closes; CD must wait for AB
        let mut d = Deduplicator::new(5000);
        assert!(d.push("cam", &rec("AB", 0.0, 0.7)).is_empty());
        assert!(d.push("cam", &rec("CD", 1.0, 0.7)).is_empty());
        assert!(d.push("cam", &rec("AB", 4.0, 0.7)).is_empty());
        assert!(d.push("cam", &rec("AB", 8.0, 0.7)).is_empty());
        let out = d.push("cam", &rec("EF", 20.0, 0.7));
        let plates: Vec<&str> = out.iter().map(|e| e.plate.as_str()).collect();
        assert_eq!(plates, vec!["AB", "CD"]);
        assert_eq!(d.flush().len(), 1);
    }
}
