//! License-plate detection, recognition and sighting tracking.
//!
//! The crate is organized along the processing path of a camera node:
//! [`imaging`] primitives, plate localization in [`detector`], character
//! recognition in [`recognizer`], per-frame orchestration in [`pipeline`],
//! and durable sighting/camera/user storage in [`trackstore`].

pub mod config;
pub mod detector;
pub mod eval;
pub mod font;
pub mod imaging;
pub mod pipeline;
pub mod recognizer;
pub mod synth;
pub mod trackstore;

pub use detector::{DetectorConfig, RotatedBox};
pub use imaging::ImageBuffer;
pub use recognizer::{PlateRead, TemplateLibrary};
