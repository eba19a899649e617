//! Core data model: footprints, waveforms, relative-height profiles, offset
//! grids, and the per-footprint scoring record.
//!
//! Conventions used throughout the crate:
//!
//! - Waveform bins run top-down: bin `i` is centered `i * bin_size` below
//!   `top_elevation`.
//! - A correction offset `(dx, dy)` is the shift that, added to the reported
//!   coordinates, moves a footprint onto its best-matching position.
//! - Offset grids are square lattices centered on `(0, 0)`, enumerated
//!   row-major by `dy` then `dx` (most negative first), so the identity
//!   offset sits at the exact center index.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Index tolerance when snapping a continuous offset onto the lattice.
const LATTICE_EPS: f64 = 1e-9;

/// One received waveform or one simulated waveform.
///
/// `amplitudes[i]` is the energy in the bin centered at
/// `top_elevation - i * bin_size`; elevations decrease with index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub top_elevation: f64,
    pub bin_size: f64,
    pub amplitudes: Vec<f64>,
}

impl Waveform {
    pub fn new(top_elevation: f64, bin_size: f64, amplitudes: Vec<f64>) -> Result<Self> {
        let wf = Waveform {
            top_elevation,
            bin_size,
            amplitudes,
        };
        wf.validate()?;
        Ok(wf)
    }

    pub fn validate(&self) -> Result<()> {
        if self.amplitudes.len() < 2 {
            return Err(Error::EmptyWaveform);
        }
        if !(self.bin_size > 0.0) || !self.top_elevation.is_finite() {
            return Err(Error::DegenerateWaveform);
        }
        if self.amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::DegenerateWaveform);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Elevation of the center of bin `i`.
    pub fn elevation_at(&self, i: usize) -> f64 {
        self.top_elevation - i as f64 * self.bin_size
    }

    /// Elevation of the center of the last bin.
    pub fn bottom_elevation(&self) -> f64 {
        self.elevation_at(self.amplitudes.len().saturating_sub(1))
    }

    pub fn total_energy(&self) -> f64 {
        self.amplitudes.iter().sum()
    }
}

/// Relative heights above the ground return at fixed cumulative-energy
/// percentiles. `heights[i]` corresponds to `percentiles[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhProfile {
    pub percentiles: Vec<u32>,
    pub heights: Vec<f64>,
}

impl RhProfile {
    /// Percentiles every profile produced by this crate carries:
    /// 0, then 25 through 100 in steps of 5.
    pub fn standard_percentiles() -> Vec<u32> {
        let mut p = vec![0];
        p.extend((25..=100).step_by(5));
        p
    }

    pub fn height(&self, percentile: u32) -> Option<f64> {
        self.percentiles
            .iter()
            .position(|&p| p == percentile)
            .map(|i| self.heights[i])
    }

    pub fn validate(&self) -> Result<()> {
        if self.percentiles.len() != self.heights.len() {
            return Err(Error::LengthMismatch(
                self.percentiles.len(),
                self.heights.len(),
            ));
        }
        for w in self.percentiles.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config("rh percentiles not increasing".into()));
            }
        }
        Ok(())
    }
}

/// One received footprint as read from a footprint file.
///
/// Quality fields are optional on the wire; a missing field fails the
/// corresponding quality filter with reason "missing quality field" rather
/// than failing the parse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub shot_number: u64,
    pub beam_id: u8,
    /// Acquisition time in seconds, strictly increasing within a beam.
    pub delta_time: f64,
    pub x: f64,
    pub y: f64,
    /// Elevation of the lowest detected mode (ground estimate) of the
    /// received waveform.
    pub elev_lowestmode: f64,
    pub rh: RhProfile,
    pub waveform: Waveform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality_flag: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrade_flag: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solar_elevation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_detected_modes: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dem_elevation: Option<f64>,
}

impl Footprint {
    pub fn validate(&self) -> Result<()> {
        if !self.x.is_finite() || !self.y.is_finite() || !self.delta_time.is_finite() {
            return Err(Error::Config("non-finite footprint coordinates".into()));
        }
        self.rh.validate()?;
        self.waveform.validate()
    }
}

/// Granularity at which one chosen offset is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrectionMode {
    Orbit,
    Beam,
    Footprint,
}

impl fmt::Display for CorrectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CorrectionMode::Orbit => "orbit",
            CorrectionMode::Beam => "beam",
            CorrectionMode::Footprint => "footprint",
        };
        f.write_str(s)
    }
}

impl FromStr for CorrectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orbit" => Ok(CorrectionMode::Orbit),
            "beam" => Ok(CorrectionMode::Beam),
            "footprint" => Ok(CorrectionMode::Footprint),
            other => Err(Error::Config(format!("unknown mode: {other}"))),
        }
    }
}

/// Square lattice of candidate offsets centered on (0, 0).
///
/// `span_m` is the requested full extent per axis and `step_m` the lattice
/// spacing. Only lattice points within half the span survive, so a span that
/// is not an even multiple of the step shrinks to the largest centered grid
/// that keeps (0, 0) on-lattice: span 5 m at step 2 m yields offsets
/// {-2, 0, 2} per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetGrid {
    span_m: f64,
    step_m: f64,
    half_steps: i64,
    offsets: Vec<(f64, f64)>,
}

impl OffsetGrid {
    pub fn new(span_m: f64, step_m: f64) -> Result<Self> {
        if !(span_m >= 0.0) || !span_m.is_finite() {
            return Err(Error::Config("grid span must be non-negative".into()));
        }
        if !(step_m > 0.0) || !step_m.is_finite() {
            return Err(Error::Config("grid step must be positive".into()));
        }
        let half_steps = (span_m / (2.0 * step_m) + LATTICE_EPS).floor() as i64;
        let axis: Vec<f64> = (-half_steps..=half_steps)
            .map(|k| k as f64 * step_m)
            .collect();
        let mut offsets = Vec::with_capacity(axis.len() * axis.len());
        for &dy in &axis {
            for &dx in &axis {
                offsets.push((dx, dy));
            }
        }
        Ok(OffsetGrid {
            span_m,
            step_m,
            half_steps,
            offsets,
        })
    }

    pub fn span_m(&self) -> f64 {
        self.span_m
    }

    pub fn step_m(&self) -> f64 {
        self.step_m
    }

    /// Largest |dx| (= |dy|) on the lattice.
    pub fn half_extent_m(&self) -> f64 {
        self.half_steps as f64 * self.step_m
    }

    /// Offsets per axis; total count is this squared.
    pub fn axis_count(&self) -> usize {
        (2 * self.half_steps + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Offsets in canonical row-major order (by dy, then dx).
    pub fn offsets(&self) -> &[(f64, f64)] {
        &self.offsets
    }

    pub fn offset(&self, index: usize) -> (f64, f64) {
        self.offsets[index]
    }

    /// Index of the identity offset (0, 0).
    pub fn center_index(&self) -> usize {
        let n = self.axis_count();
        (n * n) / 2
    }

    /// Canonical index of `(dx, dy)`, or an error when the offset is not a
    /// lattice point.
    pub fn index_of(&self, dx: f64, dy: f64) -> Result<usize> {
        let n = self.axis_count() as i64;
        let snap = |v: f64| -> Result<i64> {
            let k = (v / self.step_m).round();
            if (v - k * self.step_m).abs() > LATTICE_EPS {
                return Err(Error::OffsetNotOnGrid(dx, dy));
            }
            Ok(k as i64)
        };
        let kx = snap(dx)?;
        let ky = snap(dy)?;
        if kx.abs() > self.half_steps || ky.abs() > self.half_steps {
            return Err(Error::OffsetNotOnGrid(dx, dy));
        }
        Ok(((ky + self.half_steps) * n + (kx + self.half_steps)) as usize)
    }
}

/// Why a footprint dropped out of the offset search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InvalidReason {
    /// Simulated vegetation height disagrees with the reported profile beyond
    /// the configured threshold (e.g. the stand was cleared between
    /// acquisitions).
    #[serde(rename = "rh95 change")]
    Rh95Change,
    /// No candidate position had point coverage.
    #[serde(rename = "empty footprint")]
    EmptyFootprint,
    /// The footprint's work unit failed twice in the worker pool.
    #[serde(rename = "worker failure")]
    WorkerFailure,
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InvalidReason::Rh95Change => "rh95 change",
            InvalidReason::EmptyFootprint => "empty footprint",
            InvalidReason::WorkerFailure => "worker failure",
        };
        f.write_str(s)
    }
}

/// Per-footprint candidate scores over one offset grid.
///
/// When `valid`, `scores` has one entry in [0, 1] per grid index in canonical
/// order; otherwise `scores` is empty and `invalid_reason` says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFootprint {
    pub shot_number: u64,
    pub beam_id: u8,
    pub delta_time: f64,
    pub scores: Vec<f64>,
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid_reason: Option<InvalidReason>,
}

impl ScoredFootprint {
    pub fn invalid(fp: &Footprint, reason: InvalidReason) -> Self {
        ScoredFootprint {
            shot_number: fp.shot_number,
            beam_id: fp.beam_id,
            delta_time: fp.delta_time,
            scores: Vec::new(),
            valid: false,
            invalid_reason: Some(reason),
        }
    }
}

/// Everything extracted from one simulated waveform at one candidate offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedMetrics {
    /// Candidate offset relative to the reported coordinates.
    pub offset: (f64, f64),
    pub waveform: Waveform,
    pub ground_elevation: f64,
    pub rh: RhProfile,
}
