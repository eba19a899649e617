//! End-to-end run: footprint files in, corrected files + reports out.
//!
//! Each input file is processed independently; a bad file records an error
//! outcome and the run moves on. Within a file the flow is: read → datum
//! adjust → quality screen → coverage selection → pooled per-footprint
//! scoring → mode aggregation → resimulation at the chosen offset → merged
//! output. Every input footprint surfaces in the corrected file exactly
//! once, either with a correction or with a machine-readable discard
//! reason.
//!
//! Determinism contract: for a fixed config and inputs, every output file
//! (manifest included) is byte-identical across runs and worker counts.
//! Anything order- or time-dependent is therefore kept out of the outputs:
//! results are sorted by shot number, scratch dumps are merged in canonical
//! order, and timings go to stderr only.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::correction::{
    aggregate_beam, aggregate_footprint, aggregate_orbit, cluster_footprints,
    generate_offset_grid, process_footprint_detailed, resimulate_and_emit, ClusterWindow,
    CorrectionResult, OffsetChoice,
};
use crate::error::{Error, Result};
use crate::evaluation::{build_report, write_report_json, write_scatter_csv};
use crate::model::{Footprint, InvalidReason, OffsetGrid, ScoredFootprint};
use crate::pointcloud::{build_boundary_index, read_points, BoundaryIndex, PointRecord};
use crate::quality::{apply_quality_filters, geoid_adjust, read_geoid_raster, GeoidRaster};
use crate::simulator::simulate_waveform;

use super::config::RunConfig;
use super::formats::{write_correction_file, write_manifest, FileOutcome, RunManifest};
use super::pool::worker_pool_map;
use super::scratch::{ScratchRoot, WorkerScratch};

pub const MANIFEST_FILE_NAME: &str = "run_manifest.json";

/// Uniform-cell index over the loaded tiles. Queries walk the covered cell
/// range in row-major order and points within a cell keep load order, so a
/// gather is a pure function of the query — never of thread timing.
struct PointIndex {
    cell_m: f64,
    min_x: f64,
    min_y: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
    points: Vec<PointRecord>,
}

impl PointIndex {
    fn build(points: Vec<PointRecord>, cell_m: f64) -> Self {
        let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
        let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &points {
            min_x = min_x.min(p.x);
            min_y = min_y.min(p.y);
            max_x = max_x.max(p.x);
            max_y = max_y.max(p.y);
        }
        if points.is_empty() {
            (min_x, min_y, max_x, max_y) = (0.0, 0.0, 0.0, 0.0);
        }
        let nx = (((max_x - min_x) / cell_m).floor() as usize + 1).max(1);
        let ny = (((max_y - min_y) / cell_m).floor() as usize + 1).max(1);
        let mut cells = vec![Vec::new(); nx * ny];
        for (i, p) in points.iter().enumerate() {
            let cx = (((p.x - min_x) / cell_m) as usize).min(nx - 1);
            let cy = (((p.y - min_y) / cell_m) as usize).min(ny - 1);
            cells[cy * nx + cx].push(i as u32);
        }
        PointIndex {
            cell_m,
            min_x,
            min_y,
            nx,
            ny,
            cells,
            points,
        }
    }

    fn clamp_cell(&self, x: f64, y: f64) -> (usize, usize) {
        let cx = ((x - self.min_x) / self.cell_m).floor().max(0.0) as usize;
        let cy = ((y - self.min_y) / self.cell_m).floor().max(0.0) as usize;
        (cx.min(self.nx - 1), cy.min(self.ny - 1))
    }

    /// All points within the axis-aligned square of half-width `r`.
    fn gather(&self, x: f64, y: f64, r: f64) -> Vec<PointRecord> {
        let (cx0, cy0) = self.clamp_cell(x - r, y - r);
        let (cx1, cy1) = self.clamp_cell(x + r, y + r);
        let mut out = Vec::new();
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                for &pi in &self.cells[cy * self.nx + cx] {
                    let p = self.points[pi as usize];
                    if (p.x - x).abs() <= r && (p.y - y).abs() <= r {
                        out.push(p);
                    }
                }
            }
        }
        out
    }
}

/// One candidate simulation, flattened for the optional diagnostic dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPointRow {
    pub shot_number: u64,
    /// Canonical grid index of the candidate.
    pub candidate: usize,
    pub dx: f64,
    pub dy: f64,
    /// Absent when the candidate simulation failed (for example, shifted
    /// off the point cloud).
    pub ground_elevation: Option<f64>,
    pub rh95: Option<f64>,
    /// Combined per-candidate score; failed candidates score zero.
    pub score: f64,
}

/// Simulation at the uncorrected (reported) location, for before/after
/// comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginRow {
    pub shot_number: u64,
    pub x: f64,
    pub y: f64,
    pub ground_elevation: Option<f64>,
    pub rh95: Option<f64>,
}

/// What a finished run produced. Per-file failures are inside `files`; an
/// `Err` from [`run_pipeline`] means the run as a whole could not start.
#[derive(Debug)]
pub struct PipelineOutcome {
    pub files: Vec<FileOutcome>,
    pub manifest_path: PathBuf,
}

impl PipelineOutcome {
    /// 0 while at least one file succeeded, 1 when all failed.
    pub fn exit_code(&self) -> i32 {
        if self.files.iter().any(|f| f.status == "ok") {
            0
        } else {
            1
        }
    }
}

fn resolve_inputs(config: &RunConfig) -> Result<Vec<PathBuf>> {
    if let Some(file) = &config.input_file {
        return Ok(vec![file.clone()]);
    }
    let dir = config.granules_dir.as_ref().expect("validated config");
    let mut inputs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("jsonl"))
        .collect();
    inputs.sort();
    if inputs.is_empty() {
        return Err(Error::Config(format!(
            "no .jsonl footprint files under {}",
            dir.display()
        )));
    }
    Ok(inputs)
}

pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    let inputs = resolve_inputs(config)?;
    fs::create_dir_all(&config.out_dir)?;
    let geoid = match &config.geoid {
        Some(path) => Some(read_geoid_raster(path)?),
        None => None,
    };
    if let Some(crs) = &config.tile_crs {
        eprintln!(
            "note: tile CRS '{crs}' is recorded but not applied; \
             footprints and tiles must already share a horizontal CRS"
        );
    }
    let boundary = build_boundary_index(&config.tile_dir, config.boundary_mode)?;
    let grid = generate_offset_grid(config.grid_size_m, config.grid_step_m)?;
    let scratch = ScratchRoot::create(config.scratch_dir.as_deref())?;

    let mut files = Vec::with_capacity(inputs.len());
    for input in &inputs {
        let started = Instant::now();
        let outcome = match process_file(input, config, geoid.as_ref(), &boundary, &grid, &scratch)
        {
            Ok(o) => o,
            Err(e) => FileOutcome {
                input: input.display().to_string(),
                status: format!("error: {e}"),
                n_input: 0,
                n_rejected_quality: 0,
                n_no_datum: 0,
                n_out_of_coverage: 0,
                n_invalid: 0,
                n_corrected: 0,
                outputs: Vec::new(),
            },
        };
        eprintln!(
            "{}: {} ({} corrected / {} footprints, {:.2}s)",
            input.display(),
            outcome.status,
            outcome.n_corrected,
            outcome.n_input,
            started.elapsed().as_secs_f64()
        );
        files.push(outcome);
    }

    let manifest = RunManifest {
        mode: config.mode.to_string(),
        criteria: config.criteria.to_string(),
        grid_size_m: config.grid_size_m,
        grid_step_m: config.grid_step_m,
        time_window_s: config.time_window_s,
        boundary_mode: config.boundary_mode.to_string(),
        rh95_threshold_m: config.rh95_threshold_m,
        geoid_raster: config.geoid.as_ref().map(|p| p.display().to_string()),
        tile_crs: config.tile_crs.clone(),
        save_sim_points: config.save_sim_points,
        save_origin_location: config.save_origin_location,
        files,
    };
    let manifest_path = config.out_dir.join(MANIFEST_FILE_NAME);
    write_manifest(&manifest_path, &manifest)?;
    Ok(PipelineOutcome {
        files: manifest.files,
        manifest_path,
    })
}

/// Per-footprint aggregation result, uniform across modes.
enum ModeChoices {
    Orbit(Option<OffsetChoice>),
    Beam(std::collections::BTreeMap<u8, Option<OffsetChoice>>),
    Footprint(std::collections::BTreeMap<u64, OffsetChoice>),
}

impl ModeChoices {
    fn for_footprint(&self, fp: &Footprint) -> Option<OffsetChoice> {
        match self {
            ModeChoices::Orbit(c) => *c,
            ModeChoices::Beam(m) => m.get(&fp.beam_id).copied().flatten(),
            ModeChoices::Footprint(m) => m.get(&fp.shot_number).copied(),
        }
    }
}

fn process_file(
    input: &Path,
    config: &RunConfig,
    geoid: Option<&GeoidRaster>,
    boundary: &BoundaryIndex,
    grid: &OffsetGrid,
    scratch: &ScratchRoot,
) -> Result<FileOutcome> {
    use crate::model::CorrectionMode as Mode;
    let mode = config.mode;
    let footprints = super::formats::read_footprint_file(input)?;
    let n_input = footprints.len();
    let stem = input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("input")
        .to_string();

    // 1. vertical datum adjustment
    let (adjusted, datum_rejects) = match geoid {
        Some(raster) => {
            let (kept, rejects) = geoid_adjust(footprints, raster);
            (kept.into_iter().map(|(fp, _)| fp).collect(), rejects)
        }
        None => (footprints, Vec::new()),
    };
    let n_no_datum = datum_rejects.len();

    // 2. quality screening
    let (kept, quality_rejects) = if config.disable_quality_filters {
        (adjusted, Vec::new())
    } else {
        apply_quality_filters(adjusted, &config.quality)
    };
    let n_rejected_quality = quality_rejects.len();

    // 3. coverage: which tiles can this footprint's search region touch?
    let reach = grid.half_extent_m() + config.sim.truncation_radius_m();
    let mut needed: BTreeSet<PathBuf> = BTreeSet::new();
    let mut in_coverage = Vec::new();
    let mut no_coverage = Vec::new();
    for fp in kept {
        // select_tiles takes the full side of the query square
        let tiles = boundary.select_tiles(fp.x, fp.y, 2.0 * reach);
        if tiles.is_empty() {
            no_coverage.push(fp);
        } else {
            needed.extend(tiles);
            in_coverage.push(fp);
        }
    }
    let n_out_of_coverage = no_coverage.len();

    let mut loaded = Vec::new();
    for path in &needed {
        loaded.extend(read_points(path)?);
    }
    let index = PointIndex::build(loaded, config.sim.truncation_radius_m().max(1.0));

    // 4. pooled scoring
    let sim_file = |ws: &WorkerScratch| ws.file("sim_points.jsonl");
    let results = worker_pool_map(
        in_coverage.len(),
        config.effective_workers(),
        scratch,
        |ws, i| {
            let fp = &in_coverage[i];
            let points = index.gather(fp.x, fp.y, reach);
            let (scored, candidates) = process_footprint_detailed(
                fp,
                &points,
                grid,
                &config.sim,
                &config.criteria,
                config.rh95_threshold_m,
            );
            if config.save_sim_points && scored.valid {
                let rows: Vec<SimPointRow> = candidates
                    .iter()
                    .enumerate()
                    .map(|(k, c)| SimPointRow {
                        shot_number: fp.shot_number,
                        candidate: k,
                        dx: grid.offset(k).0,
                        dy: grid.offset(k).1,
                        ground_elevation: c.as_ref().map(|s| s.ground_elevation),
                        rh95: c.as_ref().and_then(|s| s.rh.height(95)),
                        score: scored.scores[k],
                    })
                    .collect();
                append_rows(&sim_file(ws), &rows).expect("worker scratch is writable");
            }
            scored
        },
    )?;
    let mut scored: Vec<ScoredFootprint> = results
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.unwrap_or_else(|| ScoredFootprint::invalid(&in_coverage[i], InvalidReason::WorkerFailure))
        })
        .collect();

    // coordinator orders everything by shot number from here on
    let mut order: Vec<usize> = (0..in_coverage.len()).collect();
    order.sort_by_key(|&i| in_coverage[i].shot_number);
    let in_coverage: Vec<Footprint> = {
        let mut sorted = Vec::with_capacity(in_coverage.len());
        let mut scored_sorted = Vec::with_capacity(scored.len());
        for &i in &order {
            sorted.push(in_coverage[i].clone());
            scored_sorted.push(scored[i].clone());
        }
        scored = scored_sorted;
        sorted
    };

    // 5. aggregation
    let choices = match mode {
        Mode::Orbit => ModeChoices::Orbit(aggregate_orbit(&scored, grid).ok()),
        Mode::Beam => ModeChoices::Beam(aggregate_beam(&scored, grid)),
        Mode::Footprint => {
            let window = ClusterWindow::new(config.time_window_s)?;
            let clusters = cluster_footprints(&scored, window);
            ModeChoices::Footprint(aggregate_footprint(&scored, &clusters, grid))
        }
    };

    // 6. resimulate winners; fold every rejection in with its reason
    let mut corrections: Vec<CorrectionResult> = Vec::with_capacity(n_input);
    let mut origin_rows = Vec::new();
    for r in &datum_rejects {
        corrections.push(CorrectionResult::discarded(
            &r.footprint,
            mode,
            &r.reason.to_string(),
        ));
    }
    for r in &quality_rejects {
        corrections.push(CorrectionResult::discarded(
            &r.footprint,
            mode,
            &r.reason.to_string(),
        ));
    }
    for fp in &no_coverage {
        corrections.push(CorrectionResult::discarded(fp, mode, "out of coverage"));
    }
    let trunc = config.sim.truncation_radius_m();
    for (fp, s) in in_coverage.iter().zip(&scored) {
        if !s.valid {
            let reason = s
                .invalid_reason
                .map(|r| r.to_string())
                .unwrap_or_else(|| "invalid".to_string());
            corrections.push(CorrectionResult::discarded(fp, mode, &reason));
            continue;
        }
        let result = match choices.for_footprint(fp) {
            Some(choice) => {
                let points = index.gather(fp.x + choice.offset.0, fp.y + choice.offset.1, trunc);
                resimulate_and_emit(fp, mode, &choice, Some(choice.support), &points, &config.sim)
            }
            None => CorrectionResult::discarded(fp, mode, "nothing to correct"),
        };
        if config.save_origin_location && !result.discarded {
            let points = index.gather(fp.x, fp.y, trunc);
            let sim = simulate_waveform(&points, fp.x, fp.y, &config.sim).ok();
            origin_rows.push(OriginRow {
                shot_number: fp.shot_number,
                x: fp.x,
                y: fp.y,
                ground_elevation: sim.as_ref().map(|s| s.ground_elevation),
                rh95: sim.as_ref().and_then(|s| s.rh.height(95)),
            });
        }
        corrections.push(result);
    }
    corrections.sort_by_key(|c| c.shot_number);
    let n_discarded = corrections.iter().filter(|c| c.discarded).count();
    let n_corrected = corrections.len() - n_discarded;
    // discards among in-coverage shots: scoring failures plus resimulation
    // failures at the chosen offset
    let n_invalid = n_discarded - n_no_datum - n_rejected_quality - n_out_of_coverage;

    // 7. outputs
    let out = |suffix: &str| config.out_dir.join(format!("{stem}.{suffix}"));
    let mut outputs = Vec::new();
    let corrected_path = out("corrected.jsonl");
    write_correction_file(&corrected_path, &corrections)?;
    outputs.push(format!("{stem}.corrected.jsonl"));

    // reported-side values must match the datum the simulations used
    let mut originals = in_coverage;
    originals.extend(no_coverage);
    originals.extend(quality_rejects.into_iter().map(|r| r.footprint));
    originals.extend(datum_rejects.into_iter().map(|r| r.footprint));
    let bundle = build_report(&corrections, &originals);
    write_report_json(&out("report.json"), &bundle.report)?;
    outputs.push(format!("{stem}.report.json"));
    for (variable, rows) in &bundle.scatter {
        write_scatter_csv(&out(&format!("scatter_{variable}.csv")), rows)?;
        outputs.push(format!("{stem}.scatter_{variable}.csv"));
    }

    if config.save_sim_points {
        let mut rows = collect_scratch_rows::<SimPointRow>(scratch, "sim_points.jsonl")?;
        rows.sort_by_key(|r| (r.shot_number, r.candidate));
        write_jsonl(&out("sim_points.jsonl"), &rows)?;
        outputs.push(format!("{stem}.sim_points.jsonl"));
        clear_scratch_files(scratch, "sim_points.jsonl")?;
    }
    if config.save_origin_location {
        write_jsonl(&out("origin.jsonl"), &origin_rows)?;
        outputs.push(format!("{stem}.origin.jsonl"));
    }

    Ok(FileOutcome {
        input: input.display().to_string(),
        status: "ok".to_string(),
        n_input,
        n_rejected_quality,
        n_no_datum,
        n_out_of_coverage,
        n_invalid,
        n_corrected,
        outputs,
    })
}

fn append_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut file = fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut buf = String::new();
    for row in rows {
        buf.push_str(&serde_json::to_string(row)?);
        buf.push('\n');
    }
    file.write_all(buf.as_bytes())?;
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut buf = String::new();
    for row in rows {
        buf.push_str(&serde_json::to_string(row)?);
        buf.push('\n');
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Merge one named dump from every worker scratch directory.
fn collect_scratch_rows<T: for<'de> Deserialize<'de>>(
    scratch: &ScratchRoot,
    name: &str,
) -> Result<Vec<T>> {
    let mut rows = Vec::new();
    let mut dirs: Vec<PathBuf> = fs::read_dir(scratch.path())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    for dir in dirs {
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.ends_with(name))
            })
            .collect();
        files.sort();
        for file in files {
            let text = fs::read_to_string(&file)?;
            for (lineno, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                rows.push(serde_json::from_str(line).map_err(|e| Error::Parse {
                    path: file.clone(),
                    line: lineno + 1,
                    detail: e.to_string(),
                })?);
            }
        }
    }
    Ok(rows)
}

/// Remove one named dump everywhere so the next input file starts clean.
fn clear_scratch_files(scratch: &ScratchRoot, name: &str) -> Result<()> {
    for dir in fs::read_dir(scratch.path())?.flatten() {
        let dir = dir.path();
        if !dir.is_dir() {
            continue;
        }
        for file in fs::read_dir(&dir)?.flatten() {
            let file = file.path();
            if file
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(name))
            {
                fs::remove_file(&file)?;
            }
        }
    }
    Ok(())
}
