//! Pipeline, artifact formats, query service and command line for event
//! logic graphs. The algorithms live in `elg-core`.

pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod report;
pub mod service;

pub use error::{ElgError, Result};
