//! Tile boundary polygons and the cached per-directory boundary index.
//!
//! Simple mode uses the header bounding box and never reads payloads.
//! Convex mode hulls the payload, subsampling very large tiles by uniform
//! stride plus the header corner extremes so the boundary still covers every
//! point. Boundaries are cached next to the tiles keyed by modification
//! time, so a warm index build reads neither headers nor payloads.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::UNIX_EPOCH;

use super::geom::{centered_square, convex_hull, convex_intersects};
use super::tile::{read_points, read_tile_header, TileHeader};
use crate::error::{Error, Result};

/// Payload subsample ceiling for convex boundaries on very large tiles.
const HULL_SUBSAMPLE_LIMIT: usize = 200_000;

pub const CACHE_FILE_NAME: &str = "boundaries.cache.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    /// Axis-aligned bounding box from the tile header.
    Simple,
    /// Convex hull of the point payload.
    Convex,
}

impl fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryMode::Simple => "simple",
            BoundaryMode::Convex => "convex",
        })
    }
}

impl FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(BoundaryMode::Simple),
            "convex" => Ok(BoundaryMode::Convex),
            other => Err(Error::Config(format!("unknown boundary algorithm: {other}"))),
        }
    }
}

/// Closed CCW boundary polygon of one tile. Fewer than three vertices marks
/// a degenerate (point- or line-like) tile, which still participates in
/// intersection tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileBoundary {
    pub path: PathBuf,
    pub polygon: Vec<(f64, f64)>,
    pub degenerate: bool,
    /// True when the convex hull was computed on a strided subsample padded
    /// with the header corners.
    pub subsampled: bool,
}

/// Bounding-box boundary from header extents alone.
pub fn compute_bbox(header: &TileHeader) -> TileBoundary {
    let (x0, x1) = (header.min_x, header.max_x);
    let (y0, y1) = (header.min_y, header.max_y);
    let degenerate = !(x1 > x0) || !(y1 > y0);
    let polygon = if x0 == x1 && y0 == y1 {
        vec![(x0, y0)]
    } else if x0 == x1 || y0 == y1 {
        vec![(x0, y0), (x1, y1)]
    } else {
        vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    };
    TileBoundary {
        path: header.path.clone(),
        polygon,
        degenerate,
        subsampled: false,
    }
}

/// Convex-hull boundary from the tile payload. Tiles above the subsample
/// ceiling are strided down and padded with the four header corners so the
/// hull is guaranteed to cover every point in the tile.
pub fn compute_convex_hull(header: &TileHeader) -> Result<TileBoundary> {
    let points = read_points(&header.path)?;
    let mut xy: Vec<(f64, f64)>;
    let subsampled = points.len() > HULL_SUBSAMPLE_LIMIT;
    if subsampled {
        let stride = points.len().div_ceil(HULL_SUBSAMPLE_LIMIT);
        xy = points.iter().step_by(stride).map(|p| (p.x, p.y)).collect();
        xy.extend([
            (header.min_x, header.min_y),
            (header.max_x, header.min_y),
            (header.max_x, header.max_y),
            (header.min_x, header.max_y),
        ]);
    } else {
        xy = points.iter().map(|p| (p.x, p.y)).collect();
    }
    let polygon = convex_hull(&xy);
    Ok(TileBoundary {
        path: header.path.clone(),
        degenerate: polygon.len() < 3,
        polygon,
        subsampled,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    mtime_s: u64,
    mtime_ns: u32,
    valid: bool,
    subsampled: bool,
    degenerate: bool,
    polygon: Vec<(f64, f64)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    mode: BoundaryMode,
    tiles: BTreeMap<String, CacheEntry>,
}

/// Boundary polygons for every readable tile in one directory, in path
/// order.
#[derive(Debug, Clone)]
pub struct BoundaryIndex {
    pub mode: BoundaryMode,
    pub boundaries: Vec<TileBoundary>,
    /// Tiles that could not be read, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

impl BoundaryIndex {
    /// Paths of tiles whose boundary intersects the square of side
    /// `buffer_m` centered on `(x, y)`, sorted by path.
    pub fn select_tiles(&self, x: f64, y: f64, buffer_m: f64) -> Vec<PathBuf> {
        let square = centered_square(x, y, buffer_m);
        self.boundaries
            .iter()
            .filter(|b| convex_intersects(&b.polygon, &square))
            .map(|b| b.path.clone())
            .collect()
    }
}

fn mtime_parts(path: &Path) -> Result<(u64, u32)> {
    let meta = fs::metadata(path)?;
    let mtime = meta.modified()?;
    let d = mtime
        .duration_since(UNIX_EPOCH)
        .map_err(|_| Error::Config("tile mtime precedes epoch".into()))?;
    Ok((d.as_secs(), d.subsec_nanos()))
}

fn list_tiles(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if !entry.file_type()?.is_file() {
            continue;
        }
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name == CACHE_FILE_NAME || name.starts_with('.') {
            continue;
        }
        paths.push(entry.path());
    }
    paths.sort();
    Ok(paths)
}

/// Build (or refresh) the boundary index for a tile directory.
///
/// A cache written by a previous build with the same mode is reused for
/// every tile whose modification time is unchanged; only new or touched
/// tiles are read. Unreadable tiles are skipped with a note and remembered
/// as invalid so they are not retried on every warm build.
pub fn build_boundary_index(dir: &Path, mode: BoundaryMode) -> Result<BoundaryIndex> {
    let tiles = list_tiles(dir)?;
    if tiles.is_empty() {
        return Err(Error::Config(format!(
            "no tiles found in {}",
            dir.display()
        )));
    }

    let cache_path = dir.join(CACHE_FILE_NAME);
    let old_cache: Option<CacheFile> = fs::read(&cache_path)
        .ok()
        .and_then(|bytes| serde_json::from_slice(&bytes).ok())
        .filter(|c: &CacheFile| c.version == 1 && c.mode == mode);

    let mut index = BoundaryIndex {
        mode,
        boundaries: Vec::new(),
        skipped: Vec::new(),
    };
    let mut new_cache = CacheFile {
        version: 1,
        mode,
        tiles: BTreeMap::new(),
    };
    let mut dirty = old_cache.is_none();

    for path in &tiles {
        let key = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let (mtime_s, mtime_ns) = mtime_parts(path)?;
        if let Some(entry) = old_cache.as_ref().and_then(|c| c.tiles.get(&key)) {
            if entry.mtime_s == mtime_s && entry.mtime_ns == mtime_ns {
                if entry.valid {
                    index.boundaries.push(TileBoundary {
                        path: path.clone(),
                        polygon: entry.polygon.clone(),
                        degenerate: entry.degenerate,
                        subsampled: entry.subsampled,
                    });
                } else {
                    index.skipped.push((path.clone(), "cached as unreadable".into()));
                }
                new_cache.tiles.insert(
                    key,
                    CacheEntry {
                        mtime_s,
                        mtime_ns,
                        valid: entry.valid,
                        subsampled: entry.subsampled,
                        degenerate: entry.degenerate,
                        polygon: entry.polygon.clone(),
                    },
                );
                continue;
            }
        }

        dirty = true;
        let boundary = read_tile_header(path).and_then(|h| match mode {
            BoundaryMode::Simple => Ok(compute_bbox(&h)),
            BoundaryMode::Convex => compute_convex_hull(&h),
        });
        match boundary {
            Ok(b) => {
                new_cache.tiles.insert(
                    key,
                    CacheEntry {
                        mtime_s,
                        mtime_ns,
                        valid: true,
                        subsampled: b.subsampled,
                        degenerate: b.degenerate,
                        polygon: b.polygon.clone(),
                    },
                );
                index.boundaries.push(b);
            }
            Err(e) => {
                eprintln!("skipping unreadable tile {}: {e}", path.display());
                new_cache.tiles.insert(
                    key,
                    CacheEntry {
                        mtime_s,
                        mtime_ns,
                        valid: false,
                        subsampled: false,
                        degenerate: false,
                        polygon: Vec::new(),
                    },
                );
                index.skipped.push((path.clone(), e.to_string()));
            }
        }
    }

    if dirty || new_cache.tiles.len() != old_cache.map_or(0, |c| c.tiles.len()) {
        let json = serde_json::to_string_pretty(&new_cache)?;
        fs::write(&cache_path, json)?;
    }
    Ok(index)
}
