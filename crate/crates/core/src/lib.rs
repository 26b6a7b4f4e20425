//! Geometric self-calibration of 2D tomographic scans from marker
//! projections, for parallel-beam and line-source fan-beam geometries.
//!
//! Shared domain types live in [`types`] and are re-exported at the crate
//! root.

pub mod dcc;
pub mod error;
pub mod fanbeam;
pub mod harness;
pub mod lstsq;
pub mod parallel;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
