//! Evidence-based identity resolution for historical census records.

pub mod baseline;
pub mod bench;
pub mod config;
pub mod engine;
pub mod error;
pub mod featurize;
pub mod ingest;
pub mod metrics;
pub mod pairgen;
pub mod synth;
pub mod truth;

pub use error::{Error, Result};
pub use truth::{NalConfig, Truth};
