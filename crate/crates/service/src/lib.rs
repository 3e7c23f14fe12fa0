//! Sighting service: HTTP API over a [`platetrack_core::trackstore::TrackStore`],
//! a remote ingest sink for camera nodes, and the `platetrack` command line.

pub mod api;
pub mod auth;
pub mod cli;
pub mod error;
pub mod remote;
pub mod server;

pub use api::{router, AppState};
pub use error::ApiError;
pub use remote::RemoteSink;
pub use server::{serve, spawn_server, ServerHandle};
