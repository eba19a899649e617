//! Run configuration shared by the CLI and the library pipeline entry.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::model::CorrectionMode;
use crate::pointcloud::BoundaryMode;
use crate::quality::QualityCriteria;
use crate::scoring::MetricSet;
use crate::simulator::SimParams;

/// Everything a pipeline run needs. Build one with [`RunConfig::new`] and
/// adjust fields; [`validate`](RunConfig::validate) is called on entry to
/// the pipeline.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Directory of footprint files (every `*.jsonl` inside is processed).
    pub granules_dir: Option<PathBuf>,
    /// Single footprint file; mutually exclusive with `granules_dir`.
    pub input_file: Option<PathBuf>,
    /// Directory holding the point-cloud tiles.
    pub tile_dir: PathBuf,
    pub out_dir: PathBuf,
    pub mode: CorrectionMode,
    pub criteria: MetricSet,
    /// Search span per axis in meters; candidates run -span/2 ..= span/2.
    pub grid_size_m: f64,
    pub grid_step_m: f64,
    pub parallel: bool,
    /// Worker count when `parallel` is set; ignored otherwise.
    pub n_workers: usize,
    /// Neighbor window for footprint-mode clustering, seconds.
    pub time_window_s: f64,
    pub boundary_mode: BoundaryMode,
    pub rh95_threshold_m: f64,
    pub quality: QualityCriteria,
    /// Skip the quality screening entirely (datum adjustment still runs).
    pub disable_quality_filters: bool,
    /// Optional ESRI ASCII geoid grid; when set, footprint elevations are
    /// shifted onto the tiles' vertical datum before anything else.
    pub geoid: Option<PathBuf>,
    pub save_sim_points: bool,
    pub save_origin_location: bool,
    /// Recorded in the manifest; no reprojection is performed, so tiles and
    /// footprints must already share a horizontal CRS.
    pub tile_crs: Option<String>,
    /// Temp root for worker scratch; system temp dir when unset.
    pub scratch_dir: Option<PathBuf>,
    pub sim: SimParams,
}

impl RunConfig {
    pub fn new(tile_dir: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            granules_dir: None,
            input_file: None,
            tile_dir: tile_dir.into(),
            out_dir: out_dir.into(),
            mode: CorrectionMode::Orbit,
            criteria: MetricSet::default(),
            grid_size_m: 30.0,
            grid_step_m: 1.0,
            parallel: false,
            n_workers: 8,
            time_window_s: 0.04,
            boundary_mode: BoundaryMode::Convex,
            rh95_threshold_m: 10.0,
            quality: QualityCriteria::default(),
            disable_quality_filters: false,
            geoid: None,
            save_sim_points: false,
            save_origin_location: false,
            tile_crs: None,
            scratch_dir: None,
            sim: SimParams::default(),
        }
    }

    pub fn with_input_file(mut self, path: impl Into<PathBuf>) -> Self {
        self.input_file = Some(path.into());
        self
    }

    pub fn with_granules_dir(mut self, path: impl Into<PathBuf>) -> Self {
        self.granules_dir = Some(path.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.granules_dir, &self.input_file) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "granules_dir and input_file are mutually exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "one of granules_dir or input_file is required".into(),
                ))
            }
            _ => {}
        }
        if self.n_workers == 0 {
            return Err(Error::Config("n_workers must be at least 1".into()));
        }
        if !(self.grid_step_m > 0.0) || !(self.grid_size_m >= self.grid_step_m) {
            return Err(Error::Config(
                "grid step must be positive and no larger than the span".into(),
            ));
        }
        if !(self.time_window_s >= 0.0) || !self.time_window_s.is_finite() {
            return Err(Error::Config("time window must be finite and >= 0".into()));
        }
        if !self.rh95_threshold_m.is_finite() {
            return Err(Error::Config("rh95 threshold must be finite".into()));
        }
        self.quality.validate()?;
        self.sim.validate()?;
        Ok(())
    }

    /// How many workers the pool actually gets.
    pub fn effective_workers(&self) -> usize {
        if self.parallel {
            self.n_workers.max(1)
        } else {
            1
        }
    }
}
