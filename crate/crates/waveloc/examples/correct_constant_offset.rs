//! End-to-end correction: inject a constant geolocation error into a
//! synthetic orbit, run the full pipeline in orbit mode, and check the
//! chosen offset against the truth file.
//!
//!     cargo run --example correct_constant_offset

use tempfile::tempdir;
use waveloc::engine::{read_correction_file, run_pipeline, RunConfig};
use waveloc::simulator::SimParams;
use waveloc::synthgen::{
    generate_orbit, generate_scene, random_trees, read_truth_csv, JitterSpec, SceneSpec, Terrain,
    TrackSpec,
};

fn main() -> waveloc::Result<()> {
    let dir = tempdir()?;
    let tile_dir = dir.path().join("tiles");
    let out_dir = dir.path().join("out");

    // rolling terrain so horizontal shifts actually change the waveforms
    let spec = SceneSpec {
        extent_x_m: 160.0,
        extent_y_m: 800.0,
        tile_size_m: 200.0,
        terrain: Terrain::Sine {
            amplitude_m: 4.0,
            wavelength_m: 37.0,
        },
        trees: random_trees(50, 160.0, 800.0, 21),
        ground_density_pts_m2: 0.8,
        seed: 21,
        ascii_tiles: false,
    };
    generate_scene(&spec, &tile_dir)?;

    let injected = (7.0, -4.0);
    let truth @ (tx, ty) = (-injected.0, -injected.1);
    println!("injected error {injected:?}  =>  expected correction ({tx}, {ty})");

    let track = TrackSpec::new(1, (80.0, 40.0), (0.0, 1.0), 25);
    let footprints = dir.path().join("orbit.jsonl");
    let truth_csv = dir.path().join("truth.csv");
    generate_orbit(
        &tile_dir,
        &[track],
        &JitterSpec::constant(injected.0, injected.1),
        &SimParams::default(),
        &footprints,
        &truth_csv,
    )?;

    let mut config = RunConfig::new(&tile_dir, &out_dir).with_input_file(&footprints);
    config.criteria = waveloc::scoring::MetricSet::parse("kl terrain")?;
    let outcome = run_pipeline(&config)?;
    println!("pipeline exit code: {}", outcome.exit_code());

    let results = read_correction_file(&out_dir.join("orbit.corrected.jsonl"))?;
    let corrected: Vec<_> = results.iter().filter(|r| !r.discarded).collect();
    println!(
        "{} of {} footprints corrected, chosen offset {:?}, mean score {:.4}",
        corrected.len(),
        results.len(),
        corrected[0].chosen_offset,
        corrected[0].final_score
    );

    let truth_rows = read_truth_csv(&truth_csv)?;
    assert_eq!(truth_rows[0].1, truth.0);
    assert_eq!(truth_rows[0].2, truth.1);
    let hit = corrected
        .iter()
        .all(|r| r.chosen_offset == truth);
    println!(
        "offset {} the truth file",
        if hit { "matches" } else { "MISSES" }
    );
    Ok(())
}
