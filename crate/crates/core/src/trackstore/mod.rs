//! Durable sightings, cameras and users.
//!
//! Each entity lives in its own append-only JSON-lines log under the store
//! directory (`sightings.jsonl`, `cameras.jsonl`, `users.jsonl`). Deletes are
//! tombstone records. Opening a store replays the logs; every mutation is
//! appended (and by default fsynced) before it becomes visible.

mod log;
mod secret;

pub use secret::{random_token, KeyHash, PasswordHash, DEFAULT_PBKDF2_ITERATIONS, PASSWORD_ALGORITHM};

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use self::log::AppendLog;

pub const DEFAULT_LIST_LIMIT: usize = 100;
pub const MIN_PASSWORD_LEN: usize = 8;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown camera '{0}'")]
    UnknownCamera(String),
    #[error("camera '{0}' already exists")]
    DuplicateCamera(String),
    #[error("unknown user '{0}'")]
    UnknownUser(String),
    #[error("user '{0}' already exists")]
    DuplicateUser(String),
    #[error("invalid credentials")]
    InvalidCredentials,
    #[error("{0}")]
    Validation(String),
    #[error("invalid time range: from {from} is after to {to}")]
    InvalidRange { from: i64, to: i64 },
    #[error("{}: corrupt record at line {line}: {message}", file.display())]
    Corrupt { file: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, StoreError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub lat: f64,
    pub lon: f64,
}

impl Location {
    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(StoreError::Validation(format!(
                "location ({}, {}) outside lat [-90, 90] / lon [-180, 180]",
                self.lat, self.lon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sighting {
    pub id: u64,
    pub plate: String,
    pub camera_id: String,
    pub first_seen: i64,
    pub last_seen: i64,
    pub location: Location,
    pub confidence: f64,
    /// Client-chosen idempotency key, unique per camera.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonce: Option<String>,
}

/// Input to [`TrackStore::insert_sighting`]; location comes from the camera.
#[derive(Debug, Clone, PartialEq)]
pub struct NewSighting {
    pub plate: String,
    pub camera_id: String,
    pub first_seen: i64,
    pub last_seen: i64,
    pub confidence: f64,
    pub nonce: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InsertOutcome {
    pub id: u64,
    /// True when the nonce had already been stored and nothing was written.
    pub duplicate: bool,
}

/// Camera as exposed to callers; the key hash never leaves the store.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Camera {
    pub camera_id: String,
    pub label: String,
    pub location: Location,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub camera_id: String,
    pub label: String,
    pub location: Location,
    pub api_key: KeyHash,
    pub active: bool,
}

impl CameraRecord {
    fn public(&self) -> Camera {
        Camera {
            camera_id: self.camera_id.clone(),
            label: self.label.clone(),
            location: self.location,
            active: self.active,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CameraUpdate {
    pub label: Option<String>,
    pub location: Option<Location>,
    pub active: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Admin,
    Basic,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Admin => "admin",
            Role::Basic => "basic",
        }
    }
}

impl std::str::FromStr for Role {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "admin" => Ok(Role::Admin),
            "basic" => Ok(Role::Basic),
            other => Err(StoreError::Validation(format!("unknown role '{other}', expected admin or basic"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct User {
    pub username: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub username: String,
    pub role: Role,
    pub password: PasswordHash,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SightingFilter {
    /// Case-insensitive substring of the plate text.
    pub plate: Option<String>,
    pub camera: Option<String>,
    /// Inclusive bounds on `first_seen`, UTC ms.
    pub from: Option<i64>,
    pub to: Option<i64>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathPoint {
    pub sighting_id: u64,
    pub camera_id: String,
    pub location: Location,
    pub first_seen: i64,
    pub last_seen: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum SightingOp {
    Put { sighting: Sighting },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum CameraOp {
    Put { camera: CameraRecord },
    Delete { camera_id: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum UserOp {
    Put { user: UserRecord },
    Delete { username: String },
}

#[derive(Debug, Clone)]
pub struct StoreOptions {
    /// fsync after every appended record.
    pub sync: bool,
    /// PBKDF2 iterations for newly hashed passwords.
    pub pbkdf2_iterations: u32,
}

impl Default for StoreOptions {
    fn default() -> Self {
        Self { sync: true, pbkdf2_iterations: DEFAULT_PBKDF2_ITERATIONS }
    }
}

/// Complete in-memory state, used to compare a store with its recovery.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StoreSnapshot {
    pub sightings: Vec<Sighting>,
    pub cameras: BTreeMap<String, CameraRecord>,
    pub users: BTreeMap<String, UserRecord>,
}

#[derive(Default)]
struct State {
    sightings: Vec<Sighting>,
    cameras: BTreeMap<String, CameraRecord>,
    users: BTreeMap<String, UserRecord>,
    nonces: HashMap<(String, String), u64>,
    next_id: u64,
}

impl State {
    fn apply_sighting(&mut self, op: SightingOp) {
        let SightingOp::Put { sighting } = op;
        self.next_id = self.next_id.max(sighting.id + 1);
        if let Some(n) = &sighting.nonce {
            self.nonces.insert((sighting.camera_id.clone(), n.clone()), sighting.id);
        }
        match self.sightings.binary_search_by_key(&sighting.id, |s| s.id) {
            Ok(i) => self.sightings[i] = sighting,
            Err(i) => self.sightings.insert(i, sighting),
        }
    }

    fn apply_camera(&mut self, op: CameraOp) {
        match op {
            CameraOp::Put { camera } => {
                self.cameras.insert(camera.camera_id.clone(), camera);
            }
            CameraOp::Delete { camera_id } => {
                self.cameras.remove(&camera_id);
            }
        }
    }

    fn apply_user(&mut self, op: UserOp) {
        match op {
            UserOp::Put { user } => {
                self.users.insert(user.username.clone(), user);
            }
            UserOp::Delete { username } => {
                self.users.remove(&username);
            }
        }
    }
}

struct Logs {
    sightings: AppendLog,
    cameras: AppendLog,
    users: AppendLog,
}

/// The sighting/camera/user store.
///
/// Mutations are serialized through one writer lock and become visible only
/// after their log record is written; reads share a read lock and return
/// owned copies.
pub struct TrackStore {
    dir: PathBuf,
    options: StoreOptions,
    state: RwLock<State>,
    logs: Mutex<Logs>,
    warnings: Vec<String>,
    dummy_password: PasswordHash,
}

impl std::fmt::Debug for TrackStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrackStore").field("dir", &self.dir).finish_non_exhaustive()
    }
}

fn validate_id(kind: &str, id: &str) -> Result<()> {
    if id.trim().is_empty() {
        return Err(StoreError::Validation(format!("{kind} must be non-empty")));
    }
    if id.chars().any(char::is_control) {
        return Err(StoreError::Validation(format!("{kind} must not contain control characters")));
    }
    Ok(())
}

impl TrackStore {
    /// Opens or creates a store in `dir`, replaying its logs.
    pub fn open(dir: impl AsRef<Path>, options: StoreOptions) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        let mut warnings = Vec::new();
        let mut state = State::default();
        let (sightings, ops) =
            AppendLog::open::<SightingOp>(&dir.join("sightings.jsonl"), options.sync, &mut warnings)?;
        ops.into_iter().for_each(|op| state.apply_sighting(op));
        let (cameras, ops) = AppendLog::open::<CameraOp>(&dir.join("cameras.jsonl"), options.sync, &mut warnings)?;
        ops.into_iter().for_each(|op| state.apply_camera(op));
        let (users, ops) = AppendLog::open::<UserOp>(&dir.join("users.jsonl"), options.sync, &mut warnings)?;
        ops.into_iter().for_each(|op| state.apply_user(op));
        for w in &warnings {
            ::log::warn!("{w}");
        }
        let dummy_password = PasswordHash::new("placeholder-password", options.pbkdf2_iterations);
        Ok(Self {
            dir,
            options,
            state: RwLock::new(state),
            logs: Mutex::new(Logs { sightings, cameras, users }),
            warnings,
            dummy_password,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Files written by the store.
    pub fn files(&self) -> Vec<PathBuf> {
        let logs = self.logs.lock().expect("store lock poisoned");
        vec![logs.sightings.path().to_path_buf(), logs.cameras.path().to_path_buf(), logs.users.path().to_path_buf()]
    }

    /// Problems repaired while opening (torn final records).
    pub fn recovery_warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn snapshot(&self) -> StoreSnapshot {
        let s = self.read();
        StoreSnapshot { sightings: s.sightings.clone(), cameras: s.cameras.clone(), users: s.users.clone() }
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, State> {
        self.state.read().expect("store lock poisoned")
    }

    /// Runs `f` with the writer lock held. `f` validates against the current
    /// state and returns the change to log; the change is applied to memory
    /// only after it is written.
    fn mutate<T>(
        &self,
        f: impl FnOnce(&State, &mut Logs) -> Result<(T, Option<Box<dyn FnOnce(&mut State)>>)>,
    ) -> Result<T> {
        let mut logs = self.logs.lock().expect("store lock poisoned");
        let (out, apply) = {
            let state = self.read();
            f(&state, &mut logs)?
        };
        if let Some(apply) = apply {
            apply(&mut self.state.write().expect("store lock poisoned"));
        }
        Ok(out)
    }

    // sightings

    pub fn insert_sighting(&self, new: NewSighting) -> Result<InsertOutcome> {
        validate_id("plate", &new.plate)?;
        if new.first_seen > new.last_seen {
            return Err(StoreError::Validation(format!(
                "first_seen {} is after last_seen {}",
                new.first_seen, new.last_seen
            )));
        }
        if !(0.0..=1.0).contains(&new.confidence) {
            return Err(StoreError::Validation(format!("confidence {} outside [0, 1]", new.confidence)));
        }
        self.mutate(|state, logs| {
            if let Some(n) = &new.nonce {
                if let Some(&id) = state.nonces.get(&(new.camera_id.clone(), n.clone())) {
                    return Ok((InsertOutcome { id, duplicate: true }, None));
                }
            }
            let camera =
                state.cameras.get(&new.camera_id).ok_or_else(|| StoreError::UnknownCamera(new.camera_id.clone()))?;
            let sighting = Sighting {
                id: state.next_id.max(1),
                plate: new.plate,
                camera_id: new.camera_id,
                first_seen: new.first_seen,
                last_seen: new.last_seen,
                location: camera.location,
                confidence: new.confidence,
                nonce: new.nonce,
            };
            let op = SightingOp::Put { sighting };
            logs.sightings.append(&op)?;
            let SightingOp::Put { sighting } = &op;
            let id = sighting.id;
            Ok((InsertOutcome { id, duplicate: false }, Some(Box::new(move |s: &mut State| s.apply_sighting(op)) as _)))
        })
    }

    pub fn sighting_count(&self) -> usize {
        self.read().sightings.len()
    }

    /// Matching sightings, newest `first_seen` first (ties: higher id first).
    pub fn list_sightings(&self, filter: &SightingFilter) -> Result<Vec<Sighting>> {
        if let (Some(from), Some(to)) = (filter.from, filter.to) {
            if from > to {
                return Err(StoreError::InvalidRange { from, to });
            }
        }
        let plate = filter.plate.as_ref().map(|p| p.to_uppercase());
        let state = self.read();
        let mut out: Vec<Sighting> = state
            .sightings
            .iter()
            .filter(|s| plate.as_ref().is_none_or(|p| s.plate.to_uppercase().contains(p.as_str())))
            .filter(|s| filter.camera.as_ref().is_none_or(|c| &s.camera_id == c))
            .filter(|s| filter.from.is_none_or(|f| s.first_seen >= f))
            .filter(|s| filter.to.is_none_or(|t| s.first_seen <= t))
            .cloned()
            .collect();
        out.sort_by(|a, b| b.first_seen.cmp(&a.first_seen).then(b.id.cmp(&a.id)));
        out.truncate(filter.limit.unwrap_or(DEFAULT_LIST_LIMIT));
        Ok(out)
    }

    /// Every sighting of exactly `plate`, oldest first (ties by id).
    pub fn path_for_plate(&self, plate: &str, from: Option<i64>, to: Option<i64>) -> Result<Vec<PathPoint>> {
        if let (Some(f), Some(t)) = (from, to) {
            if f > t {
                return Err(StoreError::InvalidRange { from: f, to: t });
            }
        }
        let state = self.read();
        let mut hits: Vec<&Sighting> = state
            .sightings
            .iter()
            .filter(|s| s.plate == plate)
            .filter(|s| from.is_none_or(|f| s.first_seen >= f) && to.is_none_or(|t| s.first_seen <= t))
            .collect();
        hits.sort_by(|a, b| a.first_seen.cmp(&b.first_seen).then(a.id.cmp(&b.id)));
        Ok(hits
            .into_iter()
            .map(|s| PathPoint {
                sighting_id: s.id,
                camera_id: s.camera_id.clone(),
                location: s.location,
                first_seen: s.first_seen,
                last_seen: s.last_seen,
            })
            .collect())
    }

    // cameras

    /// Registers a camera and returns it with its plaintext API key, which
    /// is not stored and cannot be retrieved again.
    pub fn create_camera(&self, camera_id: &str, label: &str, location: Location) -> Result<(Camera, String)> {
        validate_id("camera_id", camera_id)?;
        location.validate()?;
        let key = random_token(32);
        let record = CameraRecord {
            camera_id: camera_id.to_string(),
            label: label.to_string(),
            location,
            api_key: KeyHash::new(&key),
            active: true,
        };
        let camera = self.mutate(|state, logs| {
            if state.cameras.contains_key(camera_id) {
                return Err(StoreError::DuplicateCamera(camera_id.to_string()));
            }
            let op = CameraOp::Put { camera: record.clone() };
            logs.cameras.append(&op)?;
            Ok((record.public(), Some(Box::new(move |s: &mut State| s.apply_camera(op)) as _)))
        })?;
        Ok((camera, key))
    }

    pub fn update_camera(&self, camera_id: &str, update: CameraUpdate) -> Result<Camera> {
        if let Some(loc) = &update.location {
            loc.validate()?;
        }
        self.mutate(|state, logs| {
            let mut record = state
                .cameras
                .get(camera_id)
                .cloned()
                .ok_or_else(|| StoreError::UnknownCamera(camera_id.to_string()))?;
            if let Some(label) = update.label {
                record.label = label;
            }
            if let Some(location) = update.location {
                record.location = location;
            }
            if let Some(active) = update.active {
                record.active = active;
            }
            let public = record.public();
            let op = CameraOp::Put { camera: record };
            logs.cameras.append(&op)?;
            Ok((public, Some(Box::new(move |s: &mut State| s.apply_camera(op)) as _)))
        })
    }

    /// Removes a camera; its key stops authenticating immediately. Existing
    /// sightings keep the camera id.
    pub fn delete_camera(&self, camera_id: &str) -> Result<()> {
        self.mutate(|state, logs| {
            if !state.cameras.contains_key(camera_id) {
                return Err(StoreError::UnknownCamera(camera_id.to_string()));
            }
            let op = CameraOp::Delete { camera_id: camera_id.to_string() };
            logs.cameras.append(&op)?;
            Ok(((), Some(Box::new(move |s: &mut State| s.apply_camera(op)) as _)))
        })
    }

    pub fn list_cameras(&self) -> Vec<Camera> {
        self.read().cameras.values().map(CameraRecord::public).collect()
    }

    pub fn camera(&self, camera_id: &str) -> Option<Camera> {
        self.read().cameras.get(camera_id).map(CameraRecord::public)
    }

    /// The active camera whose key is `key`, if any. Every active camera's
    /// hash is checked so timing does not depend on which one matches.
    pub fn authenticate_camera(&self, key: &str) -> Option<Camera> {
        let state = self.read();
        let mut found = None;
        for c in state.cameras.values().filter(|c| c.active) {
            if c.api_key.verify(key) && found.is_none() {
                found = Some(c.public());
            }
        }
        found
    }

    // users

    pub fn create_user(&self, username: &str, password: &str, role: Role) -> Result<User> {
        validate_id("username", username)?;
        if password.chars().count() < MIN_PASSWORD_LEN {
            return Err(StoreError::Validation(format!("password must be at least {MIN_PASSWORD_LEN} characters")));
        }
        if self.read().users.contains_key(username) {
            return Err(StoreError::DuplicateUser(username.to_string()));
        }
        let record = UserRecord {
            username: username.to_string(),
            role,
            password: PasswordHash::new(password, self.options.pbkdf2_iterations),
        };
        self.mutate(|state, logs| {
            if state.users.contains_key(username) {
                return Err(StoreError::DuplicateUser(username.to_string()));
            }
            let op = UserOp::Put { user: record };
            logs.users.append(&op)?;
            Ok((
                User { username: username.to_string(), role },
                Some(Box::new(move |s: &mut State| s.apply_user(op)) as _),
            ))
        })
    }

    pub fn delete_user(&self, username: &str) -> Result<()> {
        self.mutate(|state, logs| {
            if !state.users.contains_key(username) {
                return Err(StoreError::UnknownUser(username.to_string()));
            }
            let op = UserOp::Delete { username: username.to_string() };
            logs.users.append(&op)?;
            Ok(((), Some(Box::new(move |s: &mut State| s.apply_user(op)) as _)))
        })
    }

    pub fn list_users(&self) -> Vec<User> {
        self.read().users.values().map(|u| User { username: u.username.clone(), role: u.role }).collect()
    }

    pub fn user(&self, username: &str) -> Option<User> {
        self.read().users.get(username).map(|u| User { username: u.username.clone(), role: u.role })
    }

    /// Role of `username` if `password` matches. Unknown users are checked
    /// against a placeholder hash so both failures cost the same.
    pub fn verify_credentials(&self, username: &str, password: &str) -> Result<Role> {
        let record = self.read().users.get(username).cloned();
        match record {
            Some(u) if u.password.verify(password) => Ok(u.role),
            Some(_) => Err(StoreError::InvalidCredentials),
            None => {
                let _ = self.dummy_password.verify(password);
                Err(StoreError::InvalidCredentials)
            }
        }
    }
}
