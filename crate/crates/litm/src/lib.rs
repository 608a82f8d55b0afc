//! File formats, configuration documents and reporting for `litm-core`.
//!
//! * datasets: little-endian binary records behind a plain-text header line
//! * checkpoints: versioned header, model configuration, flat parameters
//! * configs: a single JSON document, unknown keys rejected
//! * metrics: JSON lines, one object per training iteration

pub mod checkpoint;
pub mod config;
pub mod dataset_file;
pub mod error;
pub mod evaluate;
pub mod metrics;
pub mod report;
pub mod run;
mod atomic;

pub use error::{FormatError, LitmError};
