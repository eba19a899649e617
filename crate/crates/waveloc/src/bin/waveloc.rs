//! Batch front end: parse flags into a `RunConfig`, run the pipeline, map
//! the outcome onto exit codes (0 success or partial, 1 all inputs failed,
//! 2 bad configuration).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser};

use waveloc::engine::{run_pipeline, RunConfig};
use waveloc::model::CorrectionMode;
use waveloc::pointcloud::BoundaryMode;
use waveloc::scoring::MetricSet;

/// Corrects footprint geolocation in large-footprint waveform lidar files
/// by matching simulated waveforms from a reference point cloud.
#[derive(Parser)]
#[command(name = "waveloc", version)]
#[command(group = ArgGroup::new("input").required(true).args(["granules_dir", "input_file"]))]
struct Cli {
    /// Directory of footprint files; every *.jsonl inside is processed
    #[arg(long = "granules_dir", value_name = "DIR")]
    granules_dir: Option<PathBuf>,

    /// Single footprint file (mutually exclusive with --granules_dir)
    #[arg(long = "input_file", value_name = "FILE")]
    input_file: Option<PathBuf>,

    /// Directory of reference point-cloud tiles (.las or .xyz)
    #[arg(long = "las_dir", value_name = "DIR")]
    las_dir: PathBuf,

    /// Output directory (created if missing)
    #[arg(long = "out_dir", value_name = "DIR")]
    out_dir: PathBuf,

    /// Dump every candidate simulation per valid footprint
    #[arg(long = "save_sim_points")]
    save_sim_points: bool,

    /// Also simulate at the uncorrected location of each corrected footprint
    #[arg(long = "save_origin_location")]
    save_origin_location: bool,

    /// Aggregation granularity: orbit, beam, or footprint
    #[arg(long, default_value = "orbit")]
    mode: CorrectionMode,

    /// Scoring criteria (space separated): wave_pearson wave_spearman kl
    /// wave_distance terrain rh_distance
    #[arg(long, num_args = 1.., default_value = "wave_pearson")]
    criteria: Vec<String>,

    /// Candidate search span per axis, meters
    #[arg(long = "grid_size", default_value_t = 30.0)]
    grid_size: f64,

    /// Candidate spacing, meters
    #[arg(long = "grid_step", default_value_t = 1.0)]
    grid_step: f64,

    /// Enable the worker pool (serial otherwise)
    #[arg(long)]
    parallel: bool,

    /// Worker count when --parallel is set
    #[arg(long = "n_processes", default_value_t = 8)]
    n_processes: usize,

    /// Footprint-mode neighbor window, seconds
    #[arg(long = "time_window", default_value_t = 0.04)]
    time_window: f64,

    /// Horizontal CRS of the tiles; recorded in the manifest only — no
    /// reprojection is performed, inputs must already agree
    #[arg(long = "als_crs", value_name = "CODE")]
    als_crs: Option<String>,

    /// Tile boundary algorithm: simple (bounding box) or convex (hull)
    #[arg(long = "als_algorithm", default_value = "convex")]
    als_algorithm: BoundaryMode,

    /// ESRI ASCII geoid grid; aligns footprint elevations to the tile datum
    #[arg(long, value_name = "FILE")]
    geoid: Option<PathBuf>,

    /// Discard footprints whose reported RH95 differs from the mean
    /// simulated RH95 by more than this, meters
    #[arg(long = "rh95_threshold", default_value_t = 10.0)]
    rh95_threshold: f64,

    /// Skip the footprint quality screening
    #[arg(long = "disable_quality_filters")]
    disable_quality_filters: bool,

    /// Temp root for worker scratch (system temp dir by default)
    #[arg(long = "scratch_dir", value_name = "DIR")]
    scratch_dir: Option<PathBuf>,
}

fn build_config(cli: Cli) -> waveloc::Result<RunConfig> {
    let mut config = RunConfig::new(cli.las_dir, cli.out_dir);
    config.granules_dir = cli.granules_dir;
    config.input_file = cli.input_file;
    config.mode = cli.mode;
    config.criteria = MetricSet::parse(&cli.criteria.join(" "))?;
    config.grid_size_m = cli.grid_size;
    config.grid_step_m = cli.grid_step;
    config.parallel = cli.parallel;
    config.n_workers = cli.n_processes;
    config.time_window_s = cli.time_window;
    config.boundary_mode = cli.als_algorithm;
    config.rh95_threshold_m = cli.rh95_threshold;
    config.disable_quality_filters = cli.disable_quality_filters;
    config.geoid = cli.geoid;
    config.save_sim_points = cli.save_sim_points;
    config.save_origin_location = cli.save_origin_location;
    config.tile_crs = cli.als_crs;
    config.scratch_dir = cli.scratch_dir;
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match build_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_pipeline(&config) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(waveloc::Error::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            ExitCode::from(1)
        }
    }
}
