//! On-disk interchange: JSON Lines footprint and correction files, and the
//! run manifest.
//!
//! One record per line keeps the files diff-able and streamable; parse
//! errors carry the line number. Shot numbers must be unique within a
//! footprint file.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::correction::CorrectionResult;
use crate::error::{Error, Result};
use crate::model::Footprint;

fn parse_error(path: &Path, line: usize, detail: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        detail: detail.into(),
    }
}

/// Read a footprint file: one JSON footprint per line, blank lines ignored.
pub fn read_footprint_file(path: &Path) -> Result<Vec<Footprint>> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut footprints = Vec::new();
    let mut seen = BTreeSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fp: Footprint = serde_json::from_str(&line)
            .map_err(|e| parse_error(path, lineno, e.to_string()))?;
        fp.validate()
            .map_err(|e| parse_error(path, lineno, e.to_string()))?;
        if !seen.insert(fp.shot_number) {
            return Err(parse_error(
                path,
                lineno,
                format!("duplicate shot_number {}", fp.shot_number),
            ));
        }
        footprints.push(fp);
    }
    Ok(footprints)
}

pub fn write_footprint_file(path: &Path, footprints: &[Footprint]) -> Result<()> {
    let mut out = fs::File::create(path)?;
    for fp in footprints {
        serde_json::to_writer(&mut out, fp)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Read a correction output file (one JSON result per line).
pub fn read_correction_file(path: &Path) -> Result<Vec<CorrectionResult>> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut results = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: CorrectionResult = serde_json::from_str(&line)
            .map_err(|e| parse_error(path, lineno + 1, e.to_string()))?;
        results.push(r);
    }
    Ok(results)
}

pub fn write_correction_file(path: &Path, results: &[CorrectionResult]) -> Result<()> {
    let mut out = fs::File::create(path)?;
    for r in results {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Outcome of one input file inside a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileOutcome {
    pub input: String,
    /// "ok" or "error: <detail>".
    pub status: String,
    pub n_input: usize,
    pub n_rejected_quality: usize,
    pub n_no_datum: usize,
    pub n_out_of_coverage: usize,
    pub n_invalid: usize,
    pub n_corrected: usize,
    pub outputs: Vec<String>,
}

/// Run-level audit record: the configuration echoed back plus per-file
/// outcomes. It records exactly the options that determine output content —
/// execution details (worker count, scratch location, timings) are excluded
/// on purpose, so the same inputs yield a byte-identical output directory
/// no matter how or when the run executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub mode: String,
    pub criteria: String,
    pub grid_size_m: f64,
    pub grid_step_m: f64,
    pub time_window_s: f64,
    pub boundary_mode: String,
    pub rh95_threshold_m: f64,
    pub geoid_raster: Option<String>,
    pub tile_crs: Option<String>,
    pub save_sim_points: bool,
    pub save_origin_location: bool,
    pub files: Vec<FileOutcome>,
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
