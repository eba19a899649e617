//! The worker pool and its determinism contract: the same run produces
//! byte-identical outputs serially, with 2 workers, and with 8 — because
//! results are merged by shot number, never by completion order.
//!
//!     cargo run --example parallel_workers

use std::fs;

use tempfile::tempdir;
use waveloc::engine::{run_pipeline, worker_pool_map, RunConfig, ScratchRoot};
use waveloc::scoring::MetricSet;
use waveloc::simulator::SimParams;
use waveloc::synthgen::{
    generate_orbit, generate_scene, random_trees, JitterSpec, SceneSpec, Terrain, TrackSpec,
};

fn main() -> waveloc::Result<()> {
    let dir = tempdir()?;

    // the pool itself, on a toy job: indices squared, any worker count
    let scratch = ScratchRoot::create(Some(dir.path()))?;
    let serial = worker_pool_map(12, 1, &scratch, |_, i| i * i)?;
    let wide = worker_pool_map(12, 8, &scratch, |ws, i| {
        // each worker owns a prefixed scratch file it could dump into
        let _ = fs::write(ws.file("probe.txt"), format!("item {i}"));
        i * i
    })?;
    assert_eq!(serial, wide);
    println!("pool: 1-worker and 8-worker results identical over 12 items");
    drop(scratch); // run directory vanishes here

    // now the full pipeline at three worker counts
    let tile_dir = dir.path().join("tiles");
    let spec = SceneSpec {
        extent_x_m: 160.0,
        extent_y_m: 700.0,
        tile_size_m: 250.0,
        terrain: Terrain::Sine {
            amplitude_m: 4.0,
            wavelength_m: 37.0,
        },
        trees: random_trees(40, 160.0, 700.0, 9),
        ground_density_pts_m2: 0.6,
        seed: 9,
        ascii_tiles: false,
    };
    generate_scene(&spec, &tile_dir)?;
    let footprints = dir.path().join("orbit.jsonl");
    generate_orbit(
        &tile_dir,
        &[TrackSpec::new(1, (80.0, 40.0), (0.0, 1.0), 22)],
        &JitterSpec::constant(5.0, -2.0),
        &SimParams::default(),
        &footprints,
        &dir.path().join("truth.csv"),
    )?;

    let mut digests = Vec::new();
    for workers in [1usize, 2, 8] {
        let out_dir = dir.path().join(format!("out_{workers}"));
        let mut config = RunConfig::new(&tile_dir, &out_dir).with_input_file(&footprints);
        config.criteria = MetricSet::parse("kl")?;
        config.parallel = workers > 1;
        config.n_workers = workers;
        config.save_sim_points = true;
        run_pipeline(&config)?;

        // digest = sorted (name, bytes) of everything the run wrote
        let mut names = Vec::new();
        let mut bytes = 0usize;
        let mut entries: Vec<_> = fs::read_dir(&out_dir)?.map(|e| e.unwrap().path()).collect();
        entries.sort();
        let mut blob = Vec::new();
        for path in entries {
            names.push(path.file_name().unwrap().to_string_lossy().into_owned());
            let data = fs::read(&path)?;
            bytes += data.len();
            blob.extend(data);
        }
        println!(
            "{workers} worker(s): {} files, {bytes} bytes -> {:?}",
            names.len(),
            names
        );
        digests.push(blob);
    }
    assert!(digests.windows(2).all(|w| w[0] == w[1]));
    println!("all three runs byte-identical, manifest included");
    Ok(())
}
