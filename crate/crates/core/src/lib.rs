//! Consumption-pattern zones for block-group electricity data.
//!
//! The pipeline turns monthly consumption records into log10 household
//! consumption patterns, clusters them into zones, checks the spatial
//! Gaussian-field assumption per zone, and fits per-zone models of
//! consumption against income.

pub mod clustering;
pub mod error;
pub mod geostats;
pub mod gp;
pub mod ingest;
pub mod linalg;
pub mod report;
pub mod stats;
pub mod synth;
pub mod transforms;

pub use error::{Error, Result};
