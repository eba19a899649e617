//! Airborne point-cloud ingestion: tile formats, boundary polygons, and
//! buffered tile selection around footprints.

pub mod boundary;
pub mod geom;
pub mod tile;

pub use boundary::{
    build_boundary_index, compute_bbox, compute_convex_hull, BoundaryIndex, BoundaryMode,
    TileBoundary, CACHE_FILE_NAME,
};
pub use tile::{
    header_reads, payload_reads, read_points, read_tile_header, reset_io_counters,
    write_ascii_tile, write_las_tile, PointRecord, TileHeader,
};

use std::path::PathBuf;

/// Tiles whose boundary intersects the square buffer of side `buffer_m`
/// centered on the footprint position, sorted by path.
pub fn select_tiles(index: &BoundaryIndex, x: f64, y: f64, buffer_m: f64) -> Vec<PathBuf> {
    index.select_tiles(x, y, buffer_m)
}
