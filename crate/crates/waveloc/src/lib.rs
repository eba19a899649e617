//! Geolocation correction for spaceborne large-footprint waveform lidar.
//!
//! Footprint-level geolocation error in large-footprint lidar products is
//! estimated by simulating reference waveforms from an airborne point cloud
//! over a grid of candidate horizontal offsets, scoring each candidate's
//! similarity against the reported waveform, and selecting the offset that
//! maximizes agreement at orbit, beam, or footprint granularity.
//!
//! The crate is organized around that flow:
//!
//! - [`model`] — footprints, waveforms, relative-height profiles, offset grids
//! - [`pointcloud`] — tile readers, boundary polygons, tile selection
//! - [`simulator`] — waveform simulation from weighted point neighborhoods
//! - [`scoring`] — similarity metrics and candidate scoring
//! - [`correction`] — offset search, clustering, aggregation
//! - [`quality`] — observation filters and vertical-datum alignment
//! - [`evaluation`] — agreement statistics and reports
//! - [`synthgen`] — synthetic scenes and orbits with known injected offsets
//! - [`engine`] — batch pipeline, worker pool, file formats
//!
//! Runnable walkthroughs of each capability live in `examples/`; the `waveloc`
//! binary wraps the pipeline for batch use.

pub mod correction;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod pointcloud;
pub mod quality;
pub mod scoring;
pub mod simulator;
pub mod synthgen;

pub use error::{Error, Result};
