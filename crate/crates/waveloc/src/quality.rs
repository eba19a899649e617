//! Pre-correction footprint screening and vertical datum alignment.
//!
//! Screening applies a fixed-order criterion chain and records the first
//! failing criterion per footprint, so rejection counts per reason are
//! stable and meaningful. Datum alignment shifts reported elevations by a
//! bilinear lookup in a geoid-difference raster; relative heights are
//! ground-relative and therefore untouched.

use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Footprint;

/// Screening thresholds. Boolean criteria toggle off entirely; threshold
/// criteria disable at their permissive extreme (`min_sensitivity <= 0`,
/// infinite maxima).
#[derive(Debug, Clone, PartialEq)]
pub struct QualityCriteria {
    pub require_degrade_zero: bool,
    pub require_quality_one: bool,
    /// Keep only night acquisitions (solar elevation below the horizon).
    pub require_night: bool,
    pub min_sensitivity: f64,
    /// Reject apparent forest returns (RH95 >= 5 m) that resolved only a
    /// single mode: tall canopy with one mode means the ground was missed.
    pub forest_mode_check: bool,
    pub max_rh95_m: f64,
    pub max_dem_diff_m: f64,
}

impl Default for QualityCriteria {
    fn default() -> Self {
        QualityCriteria {
            require_degrade_zero: true,
            require_quality_one: true,
            require_night: true,
            min_sensitivity: 0.9,
            forest_mode_check: true,
            max_rh95_m: 30.0,
            max_dem_diff_m: 50.0,
        }
    }
}

impl QualityCriteria {
    /// Everything disabled; every footprint passes.
    pub fn permissive() -> Self {
        QualityCriteria {
            require_degrade_zero: false,
            require_quality_one: false,
            require_night: false,
            min_sensitivity: 0.0,
            forest_mode_check: false,
            max_rh95_m: f64::INFINITY,
            max_dem_diff_m: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_sensitivity) {
            return Err(Error::Config("min_sensitivity outside [0, 1]".into()));
        }
        if self.max_rh95_m.is_nan() || self.max_rh95_m < 0.0 {
            return Err(Error::Config("max_rh95_m must be non-negative".into()));
        }
        if self.max_dem_diff_m.is_nan() || self.max_dem_diff_m < 0.0 {
            return Err(Error::Config("max_dem_diff_m must be non-negative".into()));
        }
        Ok(())
    }
}

/// First criterion a rejected footprint failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    DegradeFlag,
    QualityFlag,
    SolarElevation,
    Sensitivity,
    ModeCount,
    Rh95Limit,
    DemDifference,
    MissingQualityField,
    NoDatumCoverage,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::DegradeFlag => "degrade flag",
            RejectReason::QualityFlag => "quality flag",
            RejectReason::SolarElevation => "solar elevation",
            RejectReason::Sensitivity => "sensitivity",
            RejectReason::ModeCount => "mode count",
            RejectReason::Rh95Limit => "rh95 limit",
            RejectReason::DemDifference => "dem difference",
            RejectReason::MissingQualityField => "missing quality field",
            RejectReason::NoDatumCoverage => "no datum coverage",
        })
    }
}

/// A footprint that dropped out before the offset search, with why.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedFootprint {
    pub footprint: Footprint,
    pub reason: RejectReason,
}

fn first_failure(fp: &Footprint, c: &QualityCriteria) -> Option<RejectReason> {
    use RejectReason::*;

    if c.require_degrade_zero {
        match fp.degrade_flag {
            None => return Some(MissingQualityField),
            Some(d) if d != 0 => return Some(DegradeFlag),
            _ => {}
        }
    }
    if c.require_quality_one {
        match fp.quality_flag {
            None => return Some(MissingQualityField),
            Some(q) if q != 1 => return Some(QualityFlag),
            _ => {}
        }
    }
    if c.require_night {
        match fp.solar_elevation {
            None => return Some(MissingQualityField),
            Some(s) if !(s < 0.0) => return Some(SolarElevation),
            _ => {}
        }
    }
    if c.min_sensitivity > 0.0 {
        match fp.sensitivity {
            None => return Some(MissingQualityField),
            Some(s) if !(s >= c.min_sensitivity) => return Some(Sensitivity),
            _ => {}
        }
    }
    if c.forest_mode_check {
        let rh95 = match fp.rh.height(95) {
            None => return Some(MissingQualityField),
            Some(h) => h,
        };
        match fp.num_detected_modes {
            None => return Some(MissingQualityField),
            Some(m) if rh95 >= 5.0 && m <= 1 => return Some(ModeCount),
            _ => {}
        }
    }
    if c.max_rh95_m.is_finite() {
        match fp.rh.height(95) {
            None => return Some(MissingQualityField),
            Some(h) if h > c.max_rh95_m => return Some(Rh95Limit),
            _ => {}
        }
    }
    if c.max_dem_diff_m.is_finite() {
        match fp.dem_elevation {
            None => return Some(MissingQualityField),
            Some(dem) if (fp.elev_lowestmode - dem).abs() > c.max_dem_diff_m => {
                return Some(DemDifference)
            }
            _ => {}
        }
    }
    None
}

/// Partition footprints into (kept, rejected-with-reason). Order is
/// preserved within each partition; the union is exactly the input.
pub fn apply_quality_filters(
    footprints: Vec<Footprint>,
    criteria: &QualityCriteria,
) -> (Vec<Footprint>, Vec<RejectedFootprint>) {
    let mut kept = Vec::with_capacity(footprints.len());
    let mut rejected = Vec::new();
    for fp in footprints {
        match first_failure(&fp, criteria) {
            None => kept.push(fp),
            Some(reason) => rejected.push(RejectedFootprint {
                footprint: fp,
                reason,
            }),
        }
    }
    (kept, rejected)
}

/// Grid of elevation differences between the reported vertical datum and
/// the reference point cloud's datum, on a regular raster.
///
/// Values are stored row-major with the first row northernmost, matching
/// the text interchange layout. Lookups are bilinear between cell centers;
/// nodata corners drop out with weight renormalization over the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoidRaster {
    ncols: usize,
    nrows: usize,
    xll: f64,
    yll: f64,
    cell_size: f64,
    nodata: f64,
    values: Vec<f64>,
}

impl GeoidRaster {
    pub fn new(
        ncols: usize,
        nrows: usize,
        xll: f64,
        yll: f64,
        cell_size: f64,
        nodata: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if ncols == 0 || nrows == 0 {
            return Err(Error::Config("empty raster".into()));
        }
        if !(cell_size > 0.0) {
            return Err(Error::Config("cell size must be positive".into()));
        }
        if values.len() != ncols * nrows {
            return Err(Error::LengthMismatch(values.len(), ncols * nrows));
        }
        Ok(GeoidRaster {
            ncols,
            nrows,
            xll,
            yll,
            cell_size,
            nodata,
            values,
        })
    }

    /// Build from a closure evaluated at every cell center. Handy for
    /// synthetic rasters in tests and examples.
    pub fn from_fn(
        ncols: usize,
        nrows: usize,
        xll: f64,
        yll: f64,
        cell_size: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(ncols * nrows);
        for row in 0..nrows {
            for col in 0..ncols {
                let (x, y) = Self::center_at(xll, yll, cell_size, nrows, col, row);
                values.push(f(x, y));
            }
        }
        GeoidRaster::new(ncols, nrows, xll, yll, cell_size, -9999.0, values)
    }

    fn center_at(
        xll: f64,
        yll: f64,
        cell: f64,
        nrows: usize,
        col: usize,
        row: usize,
    ) -> (f64, f64) {
        // row 0 is the northernmost
        let x = xll + (col as f64 + 0.5) * cell;
        let y = yll + ((nrows - 1 - row) as f64 + 0.5) * cell;
        (x, y)
    }

    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        Self::center_at(self.xll, self.yll, self.cell_size, self.nrows, col, row)
    }

    fn value_at(&self, col: i64, row_from_bottom: i64) -> Option<f64> {
        if col < 0
            || row_from_bottom < 0
            || col as usize >= self.ncols
            || row_from_bottom as usize >= self.nrows
        {
            return None;
        }
        let row = self.nrows - 1 - row_from_bottom as usize;
        let v = self.values[row * self.ncols + col as usize];
        if v == self.nodata || !v.is_finite() {
            None
        } else {
            Some(v)
        }
    }

    /// Bilinear sample at (x, y), or `None` outside the raster or where all
    /// four surrounding cells are nodata.
    pub fn bilinear(&self, x: f64, y: f64) -> Option<f64> {
        let w = self.ncols as f64 * self.cell_size;
        let h = self.nrows as f64 * self.cell_size;
        if x < self.xll || x > self.xll + w || y < self.yll || y > self.yll + h {
            return None;
        }
        // continuous coordinates in units of cells, measured between centers
        let gx = (x - self.xll) / self.cell_size - 0.5;
        let gy = (y - self.yll) / self.cell_size - 0.5;
        let i0 = gx.floor();
        let j0 = gy.floor();
        let fx = gx - i0;
        let fy = gy - j0;
        let (i0, j0) = (i0 as i64, j0 as i64);

        let corners = [
            (i0, j0, (1.0 - fx) * (1.0 - fy)),
            (i0 + 1, j0, fx * (1.0 - fy)),
            (i0, j0 + 1, (1.0 - fx) * fy),
            (i0 + 1, j0 + 1, fx * fy),
        ];
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, j, w) in corners {
            if let Some(v) = self.value_at(i, j) {
                num += w * v;
                den += w;
            }
        }
        if den > 0.0 {
            Some(num / den)
        } else {
            None
        }
    }
}

/// Read an ESRI ASCII grid: six header lines (`ncols`, `nrows`,
/// `xllcorner`, `yllcorner`, `cellsize`, `nodata_value`; case-insensitive,
/// nodata optional) followed by whitespace-separated row-major values,
/// first row northernmost.
pub fn read_geoid_raster(path: &Path) -> Result<GeoidRaster> {
    let text = fs::read_to_string(path)?;
    let parse_err = |line: usize, detail: &str| Error::Parse {
        path: path.to_path_buf(),
        line,
        detail: detail.to_string(),
    };

    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut cell = None;
    let mut nodata = -9999.0;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let first = parts.next().unwrap();
        if first.chars().next().is_some_and(char::is_alphabetic) {
            if !values.is_empty() {
                return Err(parse_err(lineno, "header keyword after data rows"));
            }
            let value: f64 = parts
                .next()
                .ok_or_else(|| parse_err(lineno, "missing header value"))?
                .parse()
                .map_err(|_| parse_err(lineno, "bad header value"))?;
            match first.to_ascii_lowercase().as_str() {
                "ncols" => ncols = Some(value as usize),
                "nrows" => nrows = Some(value as usize),
                "xllcorner" => xll = Some(value),
                "yllcorner" => yll = Some(value),
                "cellsize" => cell = Some(value),
                "nodata_value" => nodata = value,
                other => {
                    return Err(parse_err(lineno, &format!("unknown header keyword: {other}")))
                }
            }
        } else {
            for tok in line.split_whitespace() {
                values.push(
                    tok.parse::<f64>()
                        .map_err(|_| parse_err(lineno, "bad grid value"))?,
                );
            }
        }
    }
    let missing = |what: &str| parse_err(0, &format!("missing header: {what}"));
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let xll = xll.ok_or_else(|| missing("xllcorner"))?;
    let yll = yll.ok_or_else(|| missing("yllcorner"))?;
    let cell = cell.ok_or_else(|| missing("cellsize"))?;
    if values.len() != ncols * nrows {
        return Err(parse_err(0, &format!(
            "expected {} values, found {}",
            ncols * nrows,
            values.len()
        )));
    }
    GeoidRaster::new(ncols, nrows, xll, yll, cell, nodata, values)
}

/// Write the grid in the same text layout `read_geoid_raster` accepts.
pub fn write_geoid_raster(path: &Path, raster: &GeoidRaster) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("ncols {}\n", raster.ncols));
    out.push_str(&format!("nrows {}\n", raster.nrows));
    out.push_str(&format!("xllcorner {}\n", raster.xll));
    out.push_str(&format!("yllcorner {}\n", raster.yll));
    out.push_str(&format!("cellsize {}\n", raster.cell_size));
    out.push_str(&format!("NODATA_value {}\n", raster.nodata));
    for row in 0..raster.nrows {
        let line: Vec<String> = raster.values[row * raster.ncols..(row + 1) * raster.ncols]
            .iter()
            .map(|v| format!("{v}"))
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Shift each footprint's elevations onto the reference datum.
///
/// The lookup value is subtracted from `elev_lowestmode`, the waveform's
/// `top_elevation`, and (when present) `dem_elevation`, so elevation
/// *differences* within a footprint survive adjustment and the DEM screen
/// stays datum-consistent. Relative heights are untouched. Returns the
/// adjusted footprints paired with the applied shift, plus footprints with
/// no datum coverage.
pub fn geoid_adjust(
    footprints: Vec<Footprint>,
    raster: &GeoidRaster,
) -> (Vec<(Footprint, f64)>, Vec<RejectedFootprint>) {
    let mut kept = Vec::with_capacity(footprints.len());
    let mut rejected = Vec::new();
    for mut fp in footprints {
        match raster.bilinear(fp.x, fp.y) {
            Some(shift) => {
                fp.elev_lowestmode -= shift;
                fp.waveform.top_elevation -= shift;
                if let Some(dem) = fp.dem_elevation.as_mut() {
                    *dem -= shift;
                }
                kept.push((fp, shift));
            }
            None => rejected.push(RejectedFootprint {
                footprint: fp,
                reason: RejectReason::NoDatumCoverage,
            }),
        }
    }
    (kept, rejected)
}
