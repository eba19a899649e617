//! Generate a synthetic landscape and an orbit over it with a known,
//! injected geolocation error — the ground truth everything else in this
//! crate can be validated against.
//!
//!     cargo run --example synthetic_scene

use tempfile::tempdir;
use waveloc::engine::read_footprint_file;
use waveloc::pointcloud::read_points;
use waveloc::simulator::SimParams;
use waveloc::synthgen::{
    generate_orbit, generate_scene, random_trees, read_truth_csv, JitterSpec, SceneSpec, Terrain,
    TrackSpec,
};

fn main() -> waveloc::Result<()> {
    let dir = tempdir()?;
    let tile_dir = dir.path().join("tiles");

    let spec = SceneSpec {
        extent_x_m: 200.0,
        extent_y_m: 600.0,
        tile_size_m: 200.0,
        terrain: Terrain::Sine {
            amplitude_m: 4.0,
            wavelength_m: 37.0,
        },
        trees: random_trees(40, 200.0, 600.0, 11),
        ground_density_pts_m2: 0.8,
        seed: 11,
        ascii_tiles: false,
    };
    let tiles = generate_scene(&spec, &tile_dir)?;
    println!("wrote {} tiles:", tiles.len());
    for t in &tiles {
        let n = read_points(t)?.len();
        println!("  {} ({n} points)", t.file_name().unwrap().to_string_lossy());
    }

    // one track up the middle, reported 6 m east / 3 m south of the truth
    let track = TrackSpec::new(1, (100.0, 30.0), (0.0, 1.0), 18);
    let jitter = JitterSpec::constant(6.0, -3.0);
    let footprints_path = dir.path().join("orbit.jsonl");
    let truth_path = dir.path().join("truth_offsets.csv");
    let summary = generate_orbit(
        &tile_dir,
        &[track],
        &jitter,
        &SimParams::default(),
        &footprints_path,
        &truth_path,
    )?;
    println!(
        "\norbit: {} footprints written, {} skipped (no coverage)",
        summary.n_written, summary.n_skipped
    );

    let fps = read_footprint_file(&footprints_path)?;
    let truth = read_truth_csv(&truth_path)?;
    println!("\nshot  reported (x, y)        truth offset   RH95");
    for (fp, (_, dx, dy)) in fps.iter().zip(&truth).step_by(4) {
        println!(
            "{:>4}  ({:>7.2}, {:>7.2})   ({dx:>5.1}, {dy:>5.1})   {:>5.2} m",
            fp.shot_number,
            fp.x,
            fp.y,
            fp.rh.height(95).unwrap()
        );
    }
    println!("\napplying the truth offset to a reported position recovers the true one");
    Ok(())
}
