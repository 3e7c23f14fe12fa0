//! A camera node keeps working when the service goes away: undelivered
//! sightings land in the journal and a later replay stores each exactly once.

mod common;

use std::sync::Arc;
use std::time::Duration;

use platetrack::{spawn_server, AppState, RemoteSink, ServerHandle};
use platetrack_core::pipeline::{
    replay_journal, run, Backend, Delivery, FrameSource, PipelineConfig, SightingEvent, SightingSink, SinkError,
    SourceKind, SpoolingSink,
};
use platetrack_core::synth::{generate_corpus, CorpusSpec};
use platetrack_core::trackstore::{Location, SightingFilter, TrackStore};
use platetrack_core::TemplateLibrary;
use rand::rngs::StdRng;
use rand::SeedableRng;

/// Stops the server once `after` sightings have gone through.
struct Outage {
    inner: SpoolingSink<RemoteSink>,
    after: usize,
    seen: usize,
    server: Option<ServerHandle>,
}

impl SightingSink for Outage {
    fn deliver(&mut self, event: &SightingEvent) -> Result<Delivery, SinkError> {
        if self.seen == self.after {
            if let Some(s) = self.server.take() {
                s.stop().unwrap();
            }
        }
        self.seen += 1;
        self.inner.deliver(event)
    }
}

fn start(store: &Arc<TrackStore>) -> ServerHandle {
    spawn_server(Arc::new(AppState::new(store.clone(), 60_000)), "127.0.0.1:0").unwrap()
}

#[test]
fn outage_spools_and_replay_recovers_every_sighting() {
    let work = tempfile::tempdir().unwrap();
    let frames = work.path().join("frames");
    let spec = CorpusSpec { frames: 60, plates: 6, ..CorpusSpec::default() };
    let (_, texts) = generate_corpus(&frames, &spec, &mut StdRng::seed_from_u64(7)).unwrap();

    let store = Arc::new(TrackStore::open(work.path().join("store"), common::store_options()).unwrap());
    let (_, key) = store.create_camera("cam-1", "gate", Location { lat: 0.0, lon: 0.0 }).unwrap();
    let server = start(&store);
    let journal = work.path().join("spool.jsonl");
    let remote = RemoteSink::new(&server.url(), &key, Duration::from_secs(5)).unwrap();
    let mut sink = Outage { inner: SpoolingSink::new(remote, &journal), after: 2, seen: 0, server: Some(server) };

    let source = FrameSource::new(SourceKind::Directory(frames), "cam-1", 1.0 / 30.0).unwrap().with_start_ms(1_000_000);
    let cfg = PipelineConfig::default();
    let outcome = run(&source, &Backend::Heuristic, &TemplateLibrary::builtin(), &cfg, &mut sink).unwrap();
    assert!(sink.server.is_none(), "the outage never happened");

    let total = outcome.sightings.len();
    assert!(total >= texts.len() - 1, "only {total} sightings for {} plates", texts.len());
    assert_eq!(outcome.stored, 2);
    assert_eq!(outcome.spooled, total - 2);
    assert_eq!(outcome.failed, 0);
    assert_eq!(store.sighting_count(), 2);

    let lines = std::fs::read_to_string(&journal).unwrap();
    let spooled: Vec<SightingEvent> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(spooled, outcome.sightings[2..].to_vec());

    // A replay while the service is still down delivers nothing and loses nothing.
    let mut dead = RemoteSink::new("http://127.0.0.1:9", &key, Duration::from_millis(500)).unwrap();
    let report = replay_journal(&journal, &mut dead).unwrap();
    assert_eq!((report.delivered, report.remaining), (0, total - 2));
    assert_eq!(std::fs::read_to_string(&journal).unwrap(), lines);

    let server = start(&store);
    let mut remote = RemoteSink::new(&server.url(), &key, Duration::from_secs(5)).unwrap();
    let report = replay_journal(&journal, &mut remote).unwrap();
    assert_eq!((report.delivered, report.remaining), (total - 2, 0));
    assert_eq!(store.sighting_count(), total);

    // Delivering the whole run again is acknowledged without new rows.
    for ev in &outcome.sightings {
        assert!(matches!(remote.deliver(ev).unwrap(), Delivery::Stored { duplicate: true, .. }));
    }
    assert_eq!(store.sighting_count(), total);

    let stored = store.list_sightings(&SightingFilter { limit: Some(1000), ..SightingFilter::default() }).unwrap();
    let mut got: Vec<(String, i64)> = stored.iter().map(|s| (s.plate.clone(), s.first_seen)).collect();
    let mut want: Vec<(String, i64)> = outcome.sightings.iter().map(|e| (e.plate.clone(), e.first_seen_ms)).collect();
    got.sort();
    want.sort();
    assert_eq!(got, want);
}

#[test]
fn rejected_sightings_are_spooled_not_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(TrackStore::open(dir.path().join("store"), common::store_options()).unwrap());
    let (_, key) = store.create_camera("cam-1", "gate", Location { lat: 0.0, lon: 0.0 }).unwrap();
    let server = start(&store);
    let journal = dir.path().join("spool.jsonl");
    let remote = RemoteSink::new(&server.url(), &key, Duration::from_secs(5)).unwrap();
    let mut sink = SpoolingSink::new(remote, &journal);
    let ev: SightingEvent = serde_json::from_value(common::event("cam-2", "KA01AB1234", 5, "n1")).unwrap();
    assert_eq!(sink.deliver(&ev).unwrap(), Delivery::Spooled);
    assert_eq!(sink.spooled(), 1);
    assert_eq!(store.sighting_count(), 0);

    let mut remote = RemoteSink::new(&server.url(), &key, Duration::from_secs(5)).unwrap();
    match remote.deliver(&ev) {
        Err(SinkError::Rejected(msg)) => assert!(msg.contains("cam-2") || msg.contains("camera"), "{msg}"),
        other => panic!("expected a rejection, got {other:?}"),
    }
}
