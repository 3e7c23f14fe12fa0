#![allow(dead_code)]

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use platetrack::{spawn_server, AppState, ServerHandle};
use platetrack_core::trackstore::{Location, Role, StoreOptions, TrackStore};
use reqwest::blocking::{Client, Response};
use serde_json::{json, Value};

pub const ADMIN_PW: &str = "admin-password";
pub const BASIC_PW: &str = "basic-password";
pub const TTL_MS: i64 = 60_000;

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub store: Arc<TrackStore>,
    pub server: ServerHandle,
    pub client: Client,
    pub now: Arc<AtomicI64>,
    /// API key of camera `cam-1`.
    pub cam1_key: String,
    /// API key of camera `cam-2`.
    pub cam2_key: String,
}

pub fn store_options() -> StoreOptions {
    StoreOptions { sync: false, pbkdf2_iterations: 1_000 }
}

impl Fixture {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(TrackStore::open(dir.path(), store_options()).unwrap());
        store.create_user("admin", ADMIN_PW, Role::Admin).unwrap();
        store.create_user("basic", BASIC_PW, Role::Basic).unwrap();
        let (_, cam1_key) = store.create_camera("cam-1", "gate", Location { lat: 12.97, lon: 77.59 }).unwrap();
        let (_, cam2_key) = store.create_camera("cam-2", "exit", Location { lat: 12.98, lon: 77.60 }).unwrap();
        let now = Arc::new(AtomicI64::new(1_700_000_000_000));
        let clock_now = now.clone();
        let state = AppState::new(store.clone(), TTL_MS).with_clock(Arc::new(move || clock_now.load(Ordering::SeqCst)));
        let server = spawn_server(Arc::new(state), "127.0.0.1:0").unwrap();
        Self { dir, store, server, client: Client::new(), now, cam1_key, cam2_key }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.server.url())
    }

    pub fn advance(&self, ms: i64) {
        self.now.fetch_add(ms, Ordering::SeqCst);
    }

    pub fn login(&self, user: &str, pw: &str) -> String {
        let resp =
            self.client.post(self.url("/api/login")).json(&json!({"username": user, "password": pw})).send().unwrap();
        assert_eq!(resp.status(), 200);
        resp.json::<Value>().unwrap()["token"].as_str().unwrap().to_string()
    }

    pub fn admin(&self) -> String {
        self.login("admin", ADMIN_PW)
    }

    pub fn basic(&self) -> String {
        self.login("basic", BASIC_PW)
    }

    pub fn get(&self, path: &str, token: &str) -> Response {
        self.client.get(self.url(path)).bearer_auth(token).send().unwrap()
    }

    pub fn ingest(&self, key: &str, body: &Value) -> Response {
        self.client.post(self.url("/api/ingest")).header("x-api-key", key).json(body).send().unwrap()
    }
}

pub fn event(camera: &str, plate: &str, first_seen: i64, nonce: &str) -> Value {
    json!({
        "plate": plate,
        "camera_id": camera,
        "first_seen_ms": first_seen,
        "last_seen_ms": first_seen + 500,
        "confidence": 0.9,
        "box": {"cx": 100.0, "cy": 50.0, "w": 120.0, "h": 30.0, "angle": 0.0},
        "client_nonce": nonce,
    })
}

/// Asserts `resp` carries exactly the error body shape and returns it.
pub fn assert_api_error(resp: Response, status: u16) -> Value {
    assert_eq!(resp.status().as_u16(), status);
    let body: Value = resp.json().expect("error body is JSON");
    let obj = body.as_object().expect("error body is an object");
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(keys, ["code", "http_status", "message"], "{body}");
    assert_eq!(body["http_status"], status);
    assert!(body["code"].as_str().is_some_and(|c| !c.is_empty()));
    assert!(body["message"].is_string());
    body
}
