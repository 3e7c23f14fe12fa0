//! JSON HTTP API over a [`TrackStore`].
//!
//! Handlers authenticate before they look at the body, so an anonymous
//! request with a malformed body is a 401, not a 400. Bodies and query
//! strings are parsed by hand for the same reason.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, RawQuery, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, patch, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use platetrack_core::pipeline::SightingEvent;
use platetrack_core::trackstore::{
    Camera, CameraUpdate, Location, NewSighting, Role, Sighting, SightingFilter, TrackStore, User,
};

use crate::auth::{system_clock, Clock, Session, SessionToken, TokenTable};
use crate::error::ApiError;

pub const API_KEY_HEADER: &str = "x-api-key";
/// Largest accepted request body.
pub const MAX_BODY_BYTES: usize = 64 * 1024;

/// Credential a route demands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Public,
    /// Any signed-in user.
    Session,
    Admin,
    /// A camera API key in `X-Api-Key`.
    CameraKey,
}

/// Every route served, as `(method, path, access)`. Path parameters are
/// written `{name}`.
pub const ROUTES: &[(&str, &str, Access)] = &[
    ("POST", "/api/login", Access::Public),
    ("POST", "/api/logout", Access::Session),
    ("GET", "/api/sightings", Access::Session),
    ("GET", "/api/path", Access::Session),
    ("GET", "/api/cameras", Access::Session),
    ("POST", "/api/cameras", Access::Admin),
    ("PATCH", "/api/cameras/{id}", Access::Admin),
    ("DELETE", "/api/cameras/{id}", Access::Admin),
    ("GET", "/api/users", Access::Admin),
    ("POST", "/api/users", Access::Admin),
    ("DELETE", "/api/users/{username}", Access::Admin),
    ("POST", "/api/ingest", Access::CameraKey),
];

pub struct AppState {
    pub store: Arc<TrackStore>,
    tokens: TokenTable,
    clock: Clock,
}

impl AppState {
    pub fn new(store: Arc<TrackStore>, token_ttl_ms: i64) -> Self {
        Self { store, tokens: TokenTable::new(token_ttl_ms), clock: system_clock() }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    fn now(&self) -> i64 {
        (self.clock)()
    }

    fn session(&self, headers: &HeaderMap) -> Result<(String, Session), ApiError> {
        let value = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .ok_or_else(|| ApiError::unauthorized("missing bearer token"))?;
        let token = value
            .strip_prefix("Bearer ")
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .ok_or_else(|| ApiError::unauthorized("expected 'Authorization: Bearer <token>'"))?;
        let session =
            self.tokens.lookup(token, self.now()).ok_or_else(|| ApiError::unauthorized("invalid or expired token"))?;
        Ok((token.to_string(), session))
    }

    fn admin(&self, headers: &HeaderMap) -> Result<Session, ApiError> {
        let (_, session) = self.session(headers)?;
        if session.role != Role::Admin {
            return Err(ApiError::forbidden("admin role required"));
        }
        Ok(session)
    }
}

type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/login", post(login))
        .route("/api/logout", post(logout))
        .route("/api/sightings", get(list_sightings))
        .route("/api/path", get(plate_path))
        .route("/api/cameras", get(list_cameras).post(create_camera))
        .route("/api/cameras/{id}", patch(update_camera).delete(delete_camera))
        .route("/api/users", get(list_users).post(create_user))
        .route("/api/users/{username}", delete(delete_user))
        .route("/api/ingest", post(ingest))
        .fallback(|| async { ApiError::not_found("no such route") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed on this route")
        })
        .layer(axum::extract::DefaultBodyLimit::max(MAX_BODY_BYTES))
        .layer(middleware::map_response(ensure_api_error))
        .with_state(state)
}

/// Rewrites any non-2xx response that is not already JSON (framework
/// rejections, body-limit errors) into an [`ApiError`] body.
async fn ensure_api_error(resp: Response) -> Response {
    let status = resp.status();
    if status.is_success() || status.is_informational() || status.is_redirection() {
        return resp;
    }
    let is_json = resp
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    if is_json {
        return resp;
    }
    let body = axum::body::to_bytes(resp.into_body(), MAX_BODY_BYTES).await.unwrap_or_default();
    let mut message = String::from_utf8_lossy(&body).trim().to_string();
    if message.is_empty() {
        message = status.canonical_reason().unwrap_or("error").to_string();
    }
    ApiError::new(status, ApiError::code_for(status), message).into_response()
}

fn parse_body<T: DeserializeOwned>(body: &[u8], status_on_error: StatusCode) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        let code = ApiError::code_for(status_on_error);
        ApiError::new(status_on_error, code, format!("invalid JSON body: {e}"))
    })
}

fn query_map(raw: Option<String>) -> HashMap<String, String> {
    form_urlencoded::parse(raw.unwrap_or_default().as_bytes()).into_owned().collect()
}

fn query_num<T: std::str::FromStr>(q: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    match q.get(key).map(|v| v.trim()).filter(|v| !v.is_empty()) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| ApiError::bad_request(format!("query parameter {key}={v:?} is not a number"))),
    }
}

/// Runs store work (hashing, fsync) off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

#[derive(Deserialize)]
struct LoginRequest {
    username: String,
    password: String,
}

async fn login(State(st): Shared, body: Bytes) -> Result<Json<SessionToken>, ApiError> {
    let req: LoginRequest = parse_body(&body, StatusCode::BAD_REQUEST)?;
    let store = st.store.clone();
    let username = req.username.clone();
    let role = blocking(move || Ok(store.verify_credentials(&username, &req.password)?)).await?;
    Ok(Json(st.tokens.issue(&req.username, role, st.now())))
}

async fn logout(State(st): Shared, headers: HeaderMap) -> Result<StatusCode, ApiError> {
    let (token, _) = st.session(&headers)?;
    st.tokens.revoke(&token);
    Ok(StatusCode::NO_CONTENT)
}

/// Sighting as listed by the API.
#[derive(Debug, Serialize)]
struct SightingView {
    id: u64,
    plate: String,
    camera_id: String,
    first_seen: i64,
    last_seen: i64,
    location: Location,
    confidence: f64,
}

impl From<Sighting> for SightingView {
    fn from(s: Sighting) -> Self {
        Self {
            id: s.id,
            plate: s.plate,
            camera_id: s.camera_id,
            first_seen: s.first_seen,
            last_seen: s.last_seen,
            location: s.location,
            confidence: s.confidence,
        }
    }
}

async fn list_sightings(
    State(st): Shared,
    headers: HeaderMap,
    RawQuery(raw): RawQuery,
) -> Result<Json<Vec<SightingView>>, ApiError> {
    st.session(&headers)?;
    let q = query_map(raw);
    let non_empty = |k: &str| q.get(k).map(|v| v.trim().to_string()).filter(|v| !v.is_empty());
    let filter = SightingFilter {
        plate: non_empty("plate"),
        camera: non_empty("camera"),
        from: query_num(&q, "from")?,
        to: query_num(&q, "to")?,
        limit: query_num(&q, "limit")?,
    };
    let rows = st.store.list_sightings(&filter)?;
    Ok(Json(rows.into_iter().map(SightingView::from).collect()))
}

async fn plate_path(
    State(st): Shared,
    headers: HeaderMap,
    RawQuery(raw): RawQuery,
) -> Result<Json<Vec<platetrack_core::trackstore::PathPoint>>, ApiError> {
    st.session(&headers)?;
    let q = query_map(raw);
    let plate = q
        .get("plate")
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .ok_or_else(|| ApiError::bad_request("query parameter plate is required"))?;
    Ok(Json(st.store.path_for_plate(plate, query_num(&q, "from")?, query_num(&q, "to")?)?))
}

async fn list_cameras(State(st): Shared, headers: HeaderMap) -> Result<Json<Vec<Camera>>, ApiError> {
    st.session(&headers)?;
    Ok(Json(st.store.list_cameras()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateCamera {
    camera_id: String,
    #[serde(default)]
    label: String,
    location: Location,
}

#[derive(Serialize)]
struct CreatedCamera {
    #[serde(flatten)]
    camera: Camera,
    /// Shown once; only its hash is stored.
    api_key: String,
}

async fn create_camera(State(st): Shared, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    st.admin(&headers)?;
    let req: CreateCamera = parse_body(&body, StatusCode::BAD_REQUEST)?;
    let store = st.store.clone();
    let (camera, api_key) =
        blocking(move || Ok(store.create_camera(&req.camera_id, &req.label, req.location)?)).await?;
    Ok((StatusCode::CREATED, Json(CreatedCamera { camera, api_key })).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PatchCamera {
    label: Option<String>,
    location: Option<Location>,
    active: Option<bool>,
}

async fn update_camera(
    State(st): Shared,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<Camera>, ApiError> {
    st.admin(&headers)?;
    let req: PatchCamera = parse_body(&body, StatusCode::BAD_REQUEST)?;
    let store = st.store.clone();
    let update = CameraUpdate { label: req.label, location: req.location, active: req.active };
    Ok(Json(blocking(move || Ok(store.update_camera(&id, update)?)).await?))
}

async fn delete_camera(State(st): Shared, Path(id): Path<String>, headers: HeaderMap) -> Result<StatusCode, ApiError> {
    st.admin(&headers)?;
    let store = st.store.clone();
    blocking(move || Ok(store.delete_camera(&id)?)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn list_users(State(st): Shared, headers: HeaderMap) -> Result<Json<Vec<User>>, ApiError> {
    st.admin(&headers)?;
    Ok(Json(st.store.list_users()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateUser {
    username: String,
    password: String,
    role: String,
}

async fn create_user(State(st): Shared, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    st.admin(&headers)?;
    let req: CreateUser = parse_body(&body, StatusCode::BAD_REQUEST)?;
    let role: Role = req.role.parse()?;
    let store = st.store.clone();
    let user = blocking(move || Ok(store.create_user(&req.username, &req.password, role)?)).await?;
    Ok((StatusCode::CREATED, Json(user)).into_response())
}

async fn delete_user(
    State(st): Shared,
    Path(username): Path<String>,
    headers: HeaderMap,
) -> Result<StatusCode, ApiError> {
    st.admin(&headers)?;
    let store = st.store.clone();
    let name = username.clone();
    blocking(move || Ok(store.delete_user(&name)?)).await?;
    st.tokens.revoke_user(&username);
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestResponse {
    pub id: u64,
    pub duplicate: bool,
}

fn validate_event(ev: &SightingEvent) -> Result<(), String> {
    if ev.plate.trim().is_empty() || ev.camera_id.trim().is_empty() || ev.client_nonce.trim().is_empty() {
        return Err("plate, camera_id and client_nonce must be non-empty".into());
    }
    if ev.first_seen_ms > ev.last_seen_ms {
        return Err(format!("first_seen_ms {} is after last_seen_ms {}", ev.first_seen_ms, ev.last_seen_ms));
    }
    if !(0.0..=1.0).contains(&ev.confidence) {
        return Err(format!("confidence {} not in [0, 1]", ev.confidence));
    }
    let b = &ev.bbox;
    if ![b.cx, b.cy, b.w, b.h, b.angle].iter().all(|v| v.is_finite()) || b.w <= 0.0 || b.h <= 0.0 {
        return Err("box must have finite fields and positive size".into());
    }
    Ok(())
}

async fn ingest(State(st): Shared, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let key = headers
        .get(API_KEY_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|k| !k.is_empty())
        .ok_or_else(|| ApiError::unauthorized("missing X-Api-Key"))?
        .to_string();
    let store = st.store.clone();
    let camera = blocking(move || Ok(store.authenticate_camera(&key)))
        .await?
        .ok_or_else(|| ApiError::unauthorized("unknown or inactive API key"))?;
    let ev: SightingEvent = parse_body(&body, StatusCode::UNPROCESSABLE_ENTITY)?;
    validate_event(&ev).map_err(ApiError::unprocessable)?;
    if ev.camera_id != camera.camera_id {
        return Err(ApiError::forbidden(format!("payload camera '{}' does not match the key's camera", ev.camera_id)));
    }
    let new = NewSighting {
        plate: ev.plate,
        camera_id: ev.camera_id,
        first_seen: ev.first_seen_ms,
        last_seen: ev.last_seen_ms,
        confidence: ev.confidence,
        nonce: Some(ev.client_nonce),
    };
    let store = st.store.clone();
    let outcome = blocking(move || {
        store.insert_sighting(new).map_err(|e| match e {
            platetrack_core::trackstore::StoreError::Validation(m) => ApiError::unprocessable(m),
            other => other.into(),
        })
    })
    .await?;
    let status = if outcome.duplicate { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(IngestResponse { id: outcome.id, duplicate: outcome.duplicate })).into_response())
}
