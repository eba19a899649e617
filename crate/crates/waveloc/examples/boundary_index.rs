//! Tile boundaries and selection: write a few tiles, build the boundary
//! index (headers only for bounding boxes, payload hulls for convex mode),
//! then ask which tiles a footprint's search region touches. A second build
//! hits the on-disk cache and reads nothing.
//!
//!     cargo run --example boundary_index

use tempfile::tempdir;
use waveloc::pointcloud::{
    build_boundary_index, header_reads, payload_reads, reset_io_counters, write_las_tile,
    BoundaryMode, PointRecord,
};

fn main() -> waveloc::Result<()> {
    let dir = tempdir()?;

    // three 100 m tiles in a row; the middle one is a diagonal strip, so its
    // convex hull is much tighter than its bounding box
    for (t, x0) in [(0, 0.0), (1, 100.0), (2, 200.0)] {
        let mut points = Vec::new();
        for i in 0..100 {
            for j in 0..100 {
                let (x, y) = (x0 + i as f64, j as f64);
                if t == 1 && (x - x0 - y).abs() > 8.0 {
                    continue; // strip: only points near the diagonal
                }
                points.push(PointRecord {
                    x,
                    y,
                    z: 0.0,
                    classification: Some(2),
                });
            }
        }
        write_las_tile(&dir.path().join(format!("tile_{t}.las")), &points)?;
    }

    for mode in [BoundaryMode::Simple, BoundaryMode::Convex] {
        // boundaries are cached per mode; clear between modes
        let _ = std::fs::remove_file(dir.path().join("boundaries.cache.json"));
        reset_io_counters();
        let index = build_boundary_index(dir.path(), mode)?;
        println!(
            "{mode}: built from {} header reads, {} payload reads",
            header_reads(),
            payload_reads()
        );

        // corner of tile 1 far from the diagonal strip
        let probes = [(150.0, 50.0, "on the strip"), (195.0, 5.0, "off-strip corner")];
        for (x, y, what) in probes {
            let hits = index.select_tiles(x, y, 16.0);
            let names: Vec<_> = hits
                .iter()
                .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
                .collect();
            println!("  probe ({x:>5.1}, {y:>4.1}) {what:<18} -> {names:?}");
        }

        reset_io_counters();
        let _cached = build_boundary_index(dir.path(), mode)?;
        println!(
            "  rebuild: {} header reads, {} payload reads (cache hit)",
            header_reads(),
            payload_reads()
        );
    }

    println!("\nconvex mode drops the off-strip probe that the bbox keeps");
    Ok(())
}
