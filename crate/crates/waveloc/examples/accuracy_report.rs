//! Quantify a correction run: R², RMSE, and relative RMSE between reported
//! and simulated canopy/terrain variables, before and after correction.
//!
//!     cargo run --example accuracy_report

use tempfile::tempdir;
use waveloc::engine::{read_correction_file, read_footprint_file, run_pipeline, RunConfig};
use waveloc::evaluation::{build_report, rmse, write_report_json};
use waveloc::scoring::MetricSet;
use waveloc::simulator::SimParams;
use waveloc::synthgen::{
    generate_orbit, generate_scene, random_trees, JitterSpec, SceneSpec, Terrain, TrackSpec,
};

fn main() -> waveloc::Result<()> {
    let dir = tempdir()?;
    let tile_dir = dir.path().join("tiles");
    let out_dir = dir.path().join("out");
    let spec = SceneSpec {
        extent_x_m: 160.0,
        extent_y_m: 900.0,
        tile_size_m: 300.0,
        terrain: Terrain::Sine {
            amplitude_m: 5.0,
            wavelength_m: 37.0,
        },
        trees: random_trees(70, 160.0, 900.0, 17),
        ground_density_pts_m2: 0.7,
        seed: 17,
        ascii_tiles: false,
    };
    generate_scene(&spec, &tile_dir)?;

    let footprints = dir.path().join("granule.jsonl");
    generate_orbit(
        &tile_dir,
        &[TrackSpec::new(1, (80.0, 40.0), (0.0, 1.0), 28)],
        &JitterSpec::constant(6.0, -5.0),
        &SimParams::default(),
        &footprints,
        &dir.path().join("truth.csv"),
    )?;

    let mut config = RunConfig::new(&tile_dir, &out_dir).with_input_file(&footprints);
    config.criteria = MetricSet::parse("kl terrain")?;
    config.save_origin_location = true;
    run_pipeline(&config)?;

    // the pipeline already wrote granule.report.json; rebuild the same
    // bundle here to look inside
    let originals = read_footprint_file(&footprints)?;
    let results = read_correction_file(&out_dir.join("granule.corrected.jsonl"))?;
    let bundle = build_report(&results, &originals);
    let report = &bundle.report;
    println!(
        "{} results: {} corrected, {} discarded, mean offset {:.2} m",
        report.n_results,
        report.n_corrected,
        report.n_discarded,
        report.mean_offset_magnitude_m.unwrap()
    );
    println!("\nvariable    n     R^2      RMSE(m)   rRMSE(%)");
    for v in &report.variables {
        println!(
            "{:<10} {:>3}  {}  {}  {}",
            v.variable,
            v.n,
            v.r_squared.map_or("   --  ".into(), |x| format!("{x:7.4}")),
            v.rmse_m.map_or("   --  ".into(), |x| format!("{x:8.4}")),
            v.rrmse_pct.map_or("   --  ".into(), |x| format!("{x:8.2}")),
        );
    }

    // before/after: reported RH95 error against the uncorrected-location
    // simulations vs. the corrected ones
    let origin: Vec<waveloc::engine::OriginRow> =
        std::fs::read_to_string(out_dir.join("granule.origin.jsonl"))?
            .lines()
            .map(|l| serde_json::from_str(l).expect("rows written by the pipeline"))
            .collect();
    let reported: Vec<f64> = results
        .iter()
        .filter(|r| !r.discarded)
        .map(|r| {
            originals
                .iter()
                .find(|fp| fp.shot_number == r.shot_number)
                .and_then(|fp| fp.rh.height(95))
                .unwrap()
        })
        .collect();
    let at_origin: Vec<f64> = origin.iter().map(|o| o.rh95.unwrap()).collect();
    let corrected: Vec<f64> = results
        .iter()
        .filter(|r| !r.discarded)
        .map(|r| r.simulated.as_ref().unwrap().rh.height(95).unwrap())
        .collect();
    println!(
        "\nRH95 RMSE vs reported: {:.3} m at the uncorrected location, {:.3} m corrected",
        rmse(&reported, &at_origin)?,
        rmse(&reported, &corrected)?
    );

    let copy = out_dir.join("report_copy.json");
    write_report_json(&copy, report)?;
    println!("full report JSON at {}", copy.display());
    Ok(())
}
