//! Destinations for sightings: the local store, a journal file, or a remote
//! service with journal fallback.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use super::SightingEvent;
use crate::trackstore::{NewSighting, StoreError, TrackStore};

#[derive(Debug, Error)]
pub enum SinkError {
    /// The destination could not be reached; the sighting may be retried.
    #[error("destination unavailable: {0}")]
    Unavailable(String),
    /// The destination refused the sighting.
    #[error("sighting rejected: {0}")]
    Rejected(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delivery {
    /// Stored under this id (`duplicate` when the nonce was already known).
    Stored { id: u64, duplicate: bool },
    /// Written to a local journal for later replay.
    Spooled,
}

pub trait SightingSink {
    fn deliver(&mut self, event: &SightingEvent) -> Result<Delivery, SinkError>;
}

/// Writes straight into a local store.
pub struct StoreSink {
    store: Arc<TrackStore>,
}

impl StoreSink {
    pub fn new(store: Arc<TrackStore>) -> Self {
        Self { store }
    }
}

impl SightingSink for StoreSink {
    fn deliver(&mut self, event: &SightingEvent) -> Result<Delivery, SinkError> {
        let new = NewSighting {
            plate: event.plate.clone(),
            camera_id: event.camera_id.clone(),
            first_seen: event.first_seen_ms,
            last_seen: event.last_seen_ms,
            confidence: event.confidence,
            nonce: Some(event.client_nonce.clone()),
        };
        match self.store.insert_sighting(new) {
            Ok(o) => Ok(Delivery::Stored { id: o.id, duplicate: o.duplicate }),
            Err(StoreError::Io(e)) => Err(SinkError::Io(e)),
            Err(e) => Err(SinkError::Rejected(e.to_string())),
        }
    }
}

/// Appends every sighting as one JSON line.
pub struct JournalSink {
    path: PathBuf,
}

impl JournalSink {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl SightingSink for JournalSink {
    fn deliver(&mut self, event: &SightingEvent) -> Result<Delivery, SinkError> {
        append_journal(&self.path, event)?;
        Ok(Delivery::Spooled)
    }
}

fn append_journal(path: &Path, event: &SightingEvent) -> std::io::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut line = serde_json::to_vec(event).map_err(std::io::Error::other)?;
    line.push(b'\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(&line)?;
    f.sync_data()
}

/// Tries `inner` first and journals whatever it fails to accept.
pub struct SpoolingSink<S> {
    inner: S,
    journal: PathBuf,
    spooled: usize,
}

impl<S: SightingSink> SpoolingSink<S> {
    pub fn new(inner: S, journal: impl Into<PathBuf>) -> Self {
        Self { inner, journal: journal.into(), spooled: 0 }
    }

    pub fn spooled(&self) -> usize {
        self.spooled
    }

    pub fn journal(&self) -> &Path {
        &self.journal
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<S: SightingSink> SightingSink for SpoolingSink<S> {
    fn deliver(&mut self, event: &SightingEvent) -> Result<Delivery, SinkError> {
        match self.inner.deliver(event) {
            Ok(d) => Ok(d),
            Err(e) => {
                log::warn!("spooling sighting {} to {}: {e}", event.client_nonce, self.journal.display());
                append_journal(&self.journal, event)?;
                self.spooled += 1;
                Ok(Delivery::Spooled)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct ReplayReport {
    pub delivered: usize,
    /// Lines left in the journal: failed deliveries and unreadable lines.
    pub remaining: usize,
}

/// Re-delivers every journaled sighting to `sink` and rewrites the journal
/// with the lines that still failed. A missing journal replays nothing.
pub fn replay_journal(path: impl AsRef<Path>, sink: &mut dyn SightingSink) -> Result<ReplayReport, SinkError> {
    let path = path.as_ref();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(ReplayReport::default()),
        Err(e) => return Err(e.into()),
    };
    let mut keep = String::new();
    let mut report = ReplayReport::default();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let delivered = match serde_json::from_str::<SightingEvent>(line) {
            Ok(ev) => match sink.deliver(&ev) {
                Ok(Delivery::Stored { .. }) => true,
                Ok(Delivery::Spooled) => false,
                Err(e) => {
                    log::warn!("replay of {} failed: {e}", ev.client_nonce);
                    false
                }
            },
            Err(e) => {
                log::warn!("unreadable journal line kept: {e}");
                false
            }
        };
        if delivered {
            report.delivered += 1;
        } else {
            report.remaining += 1;
            keep.push_str(line);
            keep.push('\n');
        }
    }
    let tmp = path.with_extension("replay.tmp");
    std::fs::write(&tmp, keep)?;
    std::fs::rename(&tmp, path)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::BoxRecord;
    use crate::trackstore::{Location, StoreOptions};

    fn event(plate: &str, camera: &str, t: i64) -> SightingEvent {
        SightingEvent {
            plate: plate.into(),
            camera_id: camera.into(),
            first_seen_ms: t,
            last_seen_ms: t + 100,
            confidence: 0.9,
            bbox: BoxRecord { cx: 1.0, cy: 2.0, w: 3.0, h: 4.0, angle: 0.0 },
            client_nonce: format!("{camera}-{plate}-{t}"),
        }
    }

    struct Down;
    impl SightingSink for Down {
        fn deliver(&mut self, _: &SightingEvent) -> Result<Delivery, SinkError> {
            Err(SinkError::Unavailable("connection refused".into()))
        }
    }

    #[test]
    fn journal_line_schema() {
        let v = serde_json::to_value(event("AB12C3456", "cam", 5)).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(
            keys,
            vec!["box", "camera_id", "client_nonce", "confidence", "first_seen_ms", "last_seen_ms", "plate"]
        );
        let b: Vec<&str> = v["box"].as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(b.len(), 5);
    }

    #[test]
    fn spool_then_replay_into_store() {
        let dir = tempfile::tempdir().unwrap();
        let journal = dir.path().join("spool.jsonl");
        let mut sink = SpoolingSink::new(Down, &journal);
        for t in 0..3 {
            assert_eq!(sink.deliver(&event("AB12C3456", "cam", t)).unwrap(), Delivery::Spooled);
        }
        assert_eq!(sink.spooled(), 3);

        let store = Arc::new(
            TrackStore::open(dir.path().join("store"), StoreOptions { sync: false, pbkdf2_iterations: 1 }).unwrap(),
        );
        store.create_camera("cam", "", Location { lat: 0.0, lon: 0.0 }).unwrap();
        let mut target = StoreSink::new(store.clone());
        assert_eq!(replay_journal(&journal, &mut target).unwrap(), ReplayReport { delivered: 3, remaining: 0 });
        assert_eq!(store.sighting_count(), 3);
        assert_eq!(std::fs::read_to_string(&journal).unwrap(), "");
        // a second replay of the same events is absorbed by the nonces
        for t in 0..3 {
            JournalSink::new(&journal).deliver(&event("AB12C3456", "cam", t)).unwrap();
        }
        assert_eq!(replay_journal(&journal, &mut target).unwrap().delivered, 3);
        assert_eq!(store.sighting_count(), 3);
    }

    #[test]
    fn replay_keeps_failures() {
        let dir = tempfile::tempdir().unwrap();
        let journal = dir.path().join("spool.jsonl");
        let mut j = JournalSink::new(&journal);
        j.deliver(&event("AB12C3456", "known", 1)).unwrap();
        j.deliver(&event("AB12C3456", "unknown", 2)).unwrap();
        let store = Arc::new(
            TrackStore::open(dir.path().join("store"), StoreOptions { sync: false, pbkdf2_iterations: 1 }).unwrap(),
        );
        store.create_camera("known", "", Location { lat: 0.0, lon: 0.0 }).unwrap();
        let report = replay_journal(&journal, &mut StoreSink::new(store)).unwrap();
        assert_eq!(report, ReplayReport { delivered: 1, remaining: 1 });
        assert!(std::fs::read_to_string(&journal).unwrap().contains("\"unknown\""));
    }

    #[test]
    fn missing_journal_is_empty_replay() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(replay_journal(dir.path().join("none.jsonl"), &mut Down).unwrap(), ReplayReport::default());
    }
}
