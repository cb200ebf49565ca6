//! Standard-library companion of `twin-core`: file formats, parallel
//! pipelines, the `twin` command line and the HTTP service.

pub mod cli;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod service;

pub use error::{Result, TwinError};
