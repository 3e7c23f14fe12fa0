use std::time::Duration;

use platetrack_core::pipeline::{Delivery, SightingEvent, SightingSink, SinkError};

use crate::api::{IngestResponse, API_KEY_HEADER};
use crate::error::ApiError;

/// Delivers sightings to a service's ingest endpoint.
///
/// Transport failures and 5xx responses are [`SinkError::Unavailable`];
/// other refusals are [`SinkError::Rejected`].
pub struct RemoteSink {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
}

impl RemoteSink {
    pub fn new(base_url: &str, api_key: &str, timeout: Duration) -> Result<Self, SinkError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| SinkError::Unavailable(format!("http client: {e}")))?;
        Ok(Self {
            client,
            endpoint: format!("{}/api/ingest", base_url.trim_end_matches('/')),
            api_key: api_key.to_string(),
        })
    }
}

impl SightingSink for RemoteSink {
    fn deliver(&mut self, event: &SightingEvent) -> Result<Delivery, SinkError> {
        let resp = self
            .client
            .post(&self.endpoint)
            .header(API_KEY_HEADER, &self.api_key)
            .json(event)
            .send()
            .map_err(|e| SinkError::Unavailable(e.to_string()))?;
        let status = resp.status();
        if status.is_success() {
            let body: IngestResponse =
                resp.json().map_err(|e| SinkError::Unavailable(format!("unreadable ingest response: {e}")))?;
            return Ok(Delivery::Stored { id: body.id, duplicate: body.duplicate });
        }
        let message = match resp.json::<ApiError>() {
            Ok(e) => e.to_string(),
            Err(_) => status.to_string(),
        };
        if status.is_server_error() {
            Err(SinkError::Unavailable(message))
        } else {
            Err(SinkError::Rejected(message))
        }
    }
}
