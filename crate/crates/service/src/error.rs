use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use platetrack_core::config::ConfigError;
use platetrack_core::detector::DetectorError;
use platetrack_core::imaging::ImageError;
use platetrack_core::pipeline::{PipelineError, SinkError};
use platetrack_core::recognizer::RecognizeError;
use platetrack_core::synth::CorpusError;
use platetrack_core::trackstore::StoreError;

/// Body of every non-2xx HTTP response, and of every CLI failure on stderr.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub http_status: u16,
    pub code: String,
    pub message: String,
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", self.http_status, self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { http_status: status.as_u16(), code: code.into(), message: message.into() }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn unauthorized(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", message)
    }

    pub fn forbidden(message: impl Into<String>) -> Self {
        Self::new(StatusCode::FORBIDDEN, "forbidden", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_payload", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    /// Machine code used for a bare status produced outside the handlers.
    pub fn code_for(status: StatusCode) -> &'static str {
        match status {
            StatusCode::BAD_REQUEST => "bad_request",
            StatusCode::UNAUTHORIZED => "unauthorized",
            StatusCode::FORBIDDEN => "forbidden",
            StatusCode::NOT_FOUND => "not_found",
            StatusCode::METHOD_NOT_ALLOWED => "method_not_allowed",
            StatusCode::CONFLICT => "conflict",
            StatusCode::PAYLOAD_TOO_LARGE => "payload_too_large",
            StatusCode::UNSUPPORTED_MEDIA_TYPE => "unsupported_media_type",
            StatusCode::UNPROCESSABLE_ENTITY => "invalid_payload",
            s if s.is_server_error() => "internal",
            _ => "error",
        }
    }

    pub fn status(&self) -> StatusCode {
        StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain struct serializes")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        let mut resp = (status, Json(self)).into_response();
        resp.headers_mut().insert(header::CACHE_CONTROL, header::HeaderValue::from_static("no-store"));
        resp
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::UnknownCamera(_) | StoreError::UnknownUser(_) => ApiError::not_found(message),
            StoreError::DuplicateCamera(_) | StoreError::DuplicateUser(_) => {
                ApiError::new(StatusCode::CONFLICT, "conflict", message)
            }
            StoreError::InvalidCredentials => ApiError::new(StatusCode::UNAUTHORIZED, "invalid_credentials", message),
            StoreError::Validation(_) | StoreError::InvalidRange { .. } => ApiError::bad_request(message),
            StoreError::Corrupt { .. } | StoreError::Io(_) | StoreError::Json(_) => {
                log::error!("store failure: {message}");
                ApiError::internal(message)
            }
        }
    }
}

macro_rules! input_error {
    ($($t:ty),*) => {$(
        impl From<$t> for ApiError {
            fn from(e: $t) -> Self {
                ApiError::bad_request(e.to_string())
            }
        }
    )*};
}

input_error!(
    ConfigError,
    DetectorError,
    ImageError,
    PipelineError,
    RecognizeError,
    CorpusError,
    SinkError,
    serde_json::Error
);

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "io", e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_errors_map_to_statuses() {
        let s = |e: StoreError| ApiError::from(e).http_status;
        assert_eq!(s(StoreError::UnknownUser("x".into())), 404);
        assert_eq!(s(StoreError::DuplicateCamera("x".into())), 409);
        assert_eq!(s(StoreError::InvalidCredentials), 401);
        assert_eq!(s(StoreError::InvalidRange { from: 2, to: 1 }), 400);
        assert_eq!(s(StoreError::Io(std::io::Error::other("disk"))), 500);
    }

    #[test]
    fn json_shape() {
        let v: serde_json::Value = serde_json::from_str(&ApiError::forbidden("no").to_json()).unwrap();
        assert_eq!(v, serde_json::json!({"http_status": 403, "code": "forbidden", "message": "no"}));
    }
}
