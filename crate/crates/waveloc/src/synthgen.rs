//! Deterministic synthetic scenes and orbits with known ground truth.
//!
//! The generator writes a tiled point cloud for a parametric landscape, then
//! "flies" shot tracks over it: each footprint's waveform is simulated at the
//! shot's TRUE position while its reported coordinates carry an injected
//! error, so the offset that corrects the reported position back onto truth
//! is known exactly. The truth file stores that correcting offset (the
//! negated injection): corrected = reported + truth.
//!
//! Everything is seeded; identical specs produce byte-identical files.
//! Randomness is domain-separated (ground per tile, crown per tree, noise
//! per shot), so adding a tree never reshuffles the ground points.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::engine::formats::write_footprint_file;
use crate::error::{Error, Result};
use crate::model::Footprint;
use crate::pointcloud::{read_points, write_ascii_tile, write_las_tile, PointRecord};
use crate::simulator::{count_modes, simulate_waveform, SimParams};

/// Shots per second of the modeled instrument.
pub const SHOT_RATE_HZ: f64 = 242.0;

/// Default along-track platform speed, meters per second.
pub const DEFAULT_GROUND_SPEED_MPS: f64 = 7_000.0;

const GROUND_CLASS: u8 = 2;
const VEGETATION_CLASS: u8 = 5;

/// Independent random stream for one generator entity.
fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut s = [0u8; 32];
    s[0..8].copy_from_slice(&seed.to_le_bytes());
    s[8..16].copy_from_slice(&domain.to_le_bytes());
    s[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(s)
}

/// Analytic ground surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terrain {
    Flat {
        z0: f64,
    },
    Ramp {
        z0: f64,
        gradient_x: f64,
        gradient_y: f64,
    },
    /// Sinusoidal relief in both axes (product form), so horizontal shifts
    /// in either direction change the surface under a footprint.
    Sine {
        amplitude_m: f64,
        wavelength_m: f64,
    },
}

impl Terrain {
    pub fn elevation(&self, x: f64, y: f64) -> f64 {
        match *self {
            Terrain::Flat { z0 } => z0,
            Terrain::Ramp {
                z0,
                gradient_x,
                gradient_y,
            } => z0 + gradient_x * x + gradient_y * y,
            Terrain::Sine {
                amplitude_m,
                wavelength_m,
            } => {
                let k = TAU / wavelength_m;
                amplitude_m * (k * x).sin() * (k * y).sin()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let Terrain::Sine { wavelength_m, .. } = self {
            if !(*wavelength_m > 0.0) {
                return Err(Error::Config("sine wavelength must be positive".into()));
            }
        }
        Ok(())
    }
}

/// One tree: a spherical Gaussian blob of returns centered `height_m` above
/// the ground at its stem, with per-axis sigma `crown_radius_m / 2`,
/// truncated at three sigmas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tree {
    pub x: f64,
    pub y: f64,
    pub height_m: f64,
    pub crown_radius_m: f64,
    /// Crown returns per square meter of crown footprint.
    pub point_density: f64,
}

/// Scene recipe: extent, surface, canopy, sampling density, and tiling.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub extent_x_m: f64,
    pub extent_y_m: f64,
    pub tile_size_m: f64,
    pub terrain: Terrain,
    pub trees: Vec<Tree>,
    pub ground_density_pts_m2: f64,
    pub seed: u64,
    /// Write text tiles instead of binary ones.
    pub ascii_tiles: bool,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.extent_x_m > 0.0) || !(self.extent_y_m > 0.0) {
            return Err(Error::Config("scene extent must be positive".into()));
        }
        if !(self.tile_size_m > 0.0) {
            return Err(Error::Config("tile size must be positive".into()));
        }
        if !(self.ground_density_pts_m2 > 0.0) {
            return Err(Error::Config("ground density must be positive".into()));
        }
        self.terrain.validate()?;
        for (i, t) in self.trees.iter().enumerate() {
            let inside = (0.0..=self.extent_x_m).contains(&t.x)
                && (0.0..=self.extent_y_m).contains(&t.y);
            if !inside {
                return Err(Error::Config(format!("tree {i} outside scene extent")));
            }
            if !(t.height_m > 0.0) || !(t.crown_radius_m > 0.0) || !(t.point_density > 0.0) {
                return Err(Error::Config(format!("tree {i} has non-positive shape")));
            }
        }
        Ok(())
    }
}

/// Uniformly scattered trees with moderate stature, deterministic in `seed`.
pub fn random_trees(count: usize, extent_x_m: f64, extent_y_m: f64, seed: u64) -> Vec<Tree> {
    let mut rng = stream_rng(seed, 4, 0);
    (0..count)
        .map(|_| Tree {
            x: rng.gen_range(0.0..extent_x_m),
            y: rng.gen_range(0.0..extent_y_m),
            height_m: rng.gen_range(8.0..22.0),
            crown_radius_m: rng.gen_range(2.0..4.0),
            point_density: rng.gen_range(2.0..3.5),
        })
        .collect()
}

/// Standard-normal sample truncated at three sigmas (resampled, not
/// clamped, to keep the shape Gaussian inside the bound).
fn truncated_normal(rng: &mut ChaCha8Rng, normal: &Normal<f64>) -> f64 {
    loop {
        let v = normal.sample(rng);
        if v.abs() <= 3.0 {
            return v;
        }
    }
}

/// Write the scene as a grid of point tiles, returning the written paths in
/// row-major tile order. Tiles that ended up empty are skipped.
pub fn generate_scene(spec: &SceneSpec, dir: &Path) -> Result<Vec<PathBuf>> {
    spec.validate()?;
    fs::create_dir_all(dir)?;
    let cols = (spec.extent_x_m / spec.tile_size_m).ceil() as usize;
    let rows = (spec.extent_y_m / spec.tile_size_m).ceil() as usize;
    let mut tiles: Vec<Vec<PointRecord>> = vec![Vec::new(); cols * rows];

    for row in 0..rows {
        for col in 0..cols {
            let x0 = col as f64 * spec.tile_size_m;
            let y0 = row as f64 * spec.tile_size_m;
            let x1 = (x0 + spec.tile_size_m).min(spec.extent_x_m);
            let y1 = (y0 + spec.tile_size_m).min(spec.extent_y_m);
            let area = (x1 - x0) * (y1 - y0);
            let n = (spec.ground_density_pts_m2 * area).round() as usize;
            let tile_index = row * cols + col;
            let mut rng = stream_rng(spec.seed, 1, tile_index as u64);
            let tile = &mut tiles[tile_index];
            tile.reserve(n);
            for _ in 0..n {
                let x = rng.gen_range(x0..x1);
                let y = rng.gen_range(y0..y1);
                tile.push(PointRecord {
                    x,
                    y,
                    z: spec.terrain.elevation(x, y),
                    classification: Some(GROUND_CLASS),
                });
            }
        }
    }

    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    for (i, tree) in spec.trees.iter().enumerate() {
        let col = ((tree.x / spec.tile_size_m) as usize).min(cols - 1);
        let row = ((tree.y / spec.tile_size_m) as usize).min(rows - 1);
        let mut rng = stream_rng(spec.seed, 2, i as u64);
        let sigma = tree.crown_radius_m / 2.0;
        let crown_area = PI * tree.crown_radius_m * tree.crown_radius_m;
        let n = (tree.point_density * crown_area).ceil() as usize;
        let z_center = spec.terrain.elevation(tree.x, tree.y) + tree.height_m;
        let tile = &mut tiles[row * cols + col];
        for _ in 0..n {
            tile.push(PointRecord {
                x: tree.x + sigma * truncated_normal(&mut rng, &unit),
                y: tree.y + sigma * truncated_normal(&mut rng, &unit),
                z: z_center + sigma * truncated_normal(&mut rng, &unit),
                classification: Some(VEGETATION_CLASS),
            });
        }
    }

    let ext = if spec.ascii_tiles { "xyz" } else { "las" };
    let mut written = Vec::new();
    for row in 0..rows {
        for col in 0..cols {
            let tile = &tiles[row * cols + col];
            if tile.is_empty() {
                continue;
            }
            let path = dir.join(format!("tile_{col:03}_{row:03}.{ext}"));
            if spec.ascii_tiles {
                write_ascii_tile(&path, tile)?;
            } else {
                write_las_tile(&path, tile)?;
            }
            written.push(path);
        }
    }
    Ok(written)
}

/// One beam's straight shot track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSpec {
    pub beam_id: u8,
    pub start: (f64, f64),
    /// Along-track direction; normalized internally.
    pub direction: (f64, f64),
    pub n_shots: usize,
    pub ground_speed_mps: f64,
    pub shot_rate_hz: f64,
}

impl TrackSpec {
    /// A track with the standard shot rate and platform speed.
    pub fn new(beam_id: u8, start: (f64, f64), direction: (f64, f64), n_shots: usize) -> Self {
        TrackSpec {
            beam_id,
            start,
            direction,
            n_shots,
            ground_speed_mps: DEFAULT_GROUND_SPEED_MPS,
            shot_rate_hz: SHOT_RATE_HZ,
        }
    }

    fn validate(&self) -> Result<()> {
        let (dx, dy) = self.direction;
        if dx == 0.0 && dy == 0.0 || !dx.is_finite() || !dy.is_finite() {
            return Err(Error::Config("track direction must be nonzero".into()));
        }
        if self.n_shots == 0 {
            return Err(Error::Config("track needs at least one shot".into()));
        }
        if !(self.ground_speed_mps > 0.0) || !(self.shot_rate_hz > 0.0) {
            return Err(Error::Config("track speed and rate must be positive".into()));
        }
        Ok(())
    }
}

/// Injected geolocation error as a function of shot time:
/// a constant bias, a slow oscillation (sine on x, cosine on y, so the error
/// sweeps both axes), and white noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterSpec {
    pub constant: (f64, f64),
    pub sine_amplitude_m: f64,
    pub sine_frequency_hz: f64,
    pub sine_phase_rad: f64,
    pub noise_sigma_m: f64,
    pub seed: u64,
}

impl JitterSpec {
    pub fn none() -> Self {
        JitterSpec {
            constant: (0.0, 0.0),
            sine_amplitude_m: 0.0,
            sine_frequency_hz: 0.0,
            sine_phase_rad: 0.0,
            noise_sigma_m: 0.0,
            seed: 0,
        }
    }

    pub fn constant(dx: f64, dy: f64) -> Self {
        JitterSpec {
            constant: (dx, dy),
            ..JitterSpec::none()
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.sine_amplitude_m >= 0.0
            && self.sine_frequency_hz >= 0.0
            && self.noise_sigma_m >= 0.0
            && self.sine_phase_rad.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config("invalid jitter parameters".into()))
        }
    }

    /// Deterministic part of the injected error at time `t`.
    pub fn systematic_at(&self, t: f64) -> (f64, f64) {
        let arg = TAU * self.sine_frequency_hz * t + self.sine_phase_rad;
        (
            self.constant.0 + self.sine_amplitude_m * arg.sin(),
            self.constant.1 + self.sine_amplitude_m * arg.cos(),
        )
    }
}

/// Counts from one orbit generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrbitSummary {
    pub n_written: usize,
    /// Shots whose true position produced no usable waveform.
    pub n_skipped: usize,
}

/// Fly `tracks` over the tiles in `tile_dir`, simulate each shot at its true
/// position, report it displaced by the jitter, and write the footprint file
/// plus the truth offsets that undo the displacement.
pub fn generate_orbit(
    tile_dir: &Path,
    tracks: &[TrackSpec],
    jitter: &JitterSpec,
    params: &SimParams,
    footprints_out: &Path,
    truth_out: &Path,
) -> Result<OrbitSummary> {
    jitter.validate()?;
    for track in tracks {
        track.validate()?;
    }
    if tracks.is_empty() {
        return Err(Error::Config("no tracks".into()));
    }

    let mut tile_paths: Vec<PathBuf> = fs::read_dir(tile_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("las" | "xyz" | "txt")
            )
        })
        .collect();
    tile_paths.sort();
    if tile_paths.is_empty() {
        return Err(Error::Config(format!(
            "no point tiles under {}",
            tile_dir.display()
        )));
    }
    let mut points = Vec::new();
    for path in &tile_paths {
        points.extend(read_points(path)?);
    }

    let noise = if jitter.noise_sigma_m > 0.0 {
        Some(Normal::new(0.0, jitter.noise_sigma_m).expect("validated sigma"))
    } else {
        None
    };

    let mut footprints = Vec::new();
    let mut truths = Vec::new();
    let mut shot_number = 0u64;
    let mut skipped = 0usize;
    for track in tracks {
        let (dx, dy) = track.direction;
        let norm = (dx * dx + dy * dy).sqrt();
        let (ux, uy) = (dx / norm, dy / norm);
        let spacing = track.ground_speed_mps / track.shot_rate_hz;
        for k in 0..track.n_shots {
            let shot = shot_number;
            shot_number += 1;
            let t = k as f64 / track.shot_rate_hz;
            let true_x = track.start.0 + ux * spacing * k as f64;
            let true_y = track.start.1 + uy * spacing * k as f64;
            let (mut jx, mut jy) = jitter.systematic_at(t);
            if let Some(n) = &noise {
                let mut rng = stream_rng(jitter.seed, 3, shot);
                jx += n.sample(&mut rng);
                jy += n.sample(&mut rng);
            }
            let sim = match simulate_waveform(&points, true_x, true_y, params) {
                Ok(sim) => sim,
                Err(_) => {
                    skipped += 1;
                    continue;
                }
            };
            let modes = count_modes(&sim.waveform, params).max(2) as u32;
            footprints.push(Footprint {
                shot_number: shot,
                beam_id: track.beam_id,
                delta_time: t,
                x: true_x + jx,
                y: true_y + jy,
                elev_lowestmode: sim.ground_elevation,
                rh: sim.rh,
                waveform: sim.waveform,
                sensitivity: Some(0.97),
                quality_flag: Some(1),
                degrade_flag: Some(0),
                solar_elevation: Some(-30.0),
                // metadata is set to clear the default screening: these are
                // inputs in real products, not derived quantities
                num_detected_modes: Some(modes),
                dem_elevation: Some(sim.ground_elevation),
            });
            truths.push((shot, -jx, -jy));
        }
    }
    if footprints.is_empty() {
        return Err(Error::Config("no track shot intersects the scene".into()));
    }
    write_footprint_file(footprints_out, &footprints)?;
    write_truth_csv(truth_out, &truths)?;
    Ok(OrbitSummary {
        n_written: footprints.len(),
        n_skipped: skipped,
    })
}

/// Truth offsets: `corrected = reported + (dx, dy)` recovers the true
/// position.
pub fn write_truth_csv(path: &Path, truths: &[(u64, f64, f64)]) -> Result<()> {
    let mut out = String::from("shot_number,dx,dy\n");
    for (shot, dx, dy) in truths {
        out.push_str(&format!("{shot},{dx},{dy}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_truth_csv(path: &Path) -> Result<Vec<(u64, f64, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let bad = || Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            detail: "expected shot_number,dx,dy".into(),
        };
        let shot = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let dx = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let dy = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        out.push((shot, dx, dy));
    }
    Ok(out)
}
