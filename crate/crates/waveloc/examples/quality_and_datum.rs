//! Observation screening and vertical-datum alignment: which footprints
//! survive the quality criteria, why the others fall, and how a geoid grid
//! shifts elevations onto the point cloud's datum before comparison.
//!
//!     cargo run --example quality_and_datum

use tempfile::tempdir;
use waveloc::model::{Footprint, RhProfile, Waveform};
use waveloc::quality::{
    apply_quality_filters, geoid_adjust, read_geoid_raster, write_geoid_raster, GeoidRaster,
    QualityCriteria,
};

fn footprint(shot: u64, x: f64, y: f64) -> Footprint {
    Footprint {
        shot_number: shot,
        beam_id: 0,
        delta_time: shot as f64 / 242.0,
        x,
        y,
        elev_lowestmode: 100.0,
        rh: RhProfile {
            percentiles: vec![0, 50, 95, 100],
            heights: vec![-1.0, 6.0, 14.0, 16.0],
        },
        waveform: Waveform::new(130.0, 0.15, vec![0.1, 0.8, 0.3, 1.0, 0.2]).unwrap(),
        sensitivity: Some(0.95),
        quality_flag: Some(1),
        degrade_flag: Some(0),
        solar_elevation: Some(-12.0),
        num_detected_modes: Some(3),
        dem_elevation: Some(101.0),
    }
}

fn main() -> waveloc::Result<()> {
    // a good footprint, plus one broken per criterion
    let good = footprint(0, 10.0, 10.0);
    let mut daytime = footprint(1, 20.0, 10.0);
    daytime.solar_elevation = Some(35.0);
    let mut weak = footprint(2, 30.0, 10.0);
    weak.sensitivity = Some(0.72);
    let mut single_mode_forest = footprint(3, 40.0, 10.0);
    single_mode_forest.num_detected_modes = Some(1); // RH95 = 14 m says forest
    let mut far_from_dem = footprint(4, 50.0, 10.0);
    far_from_dem.dem_elevation = Some(230.0);
    let mut unknown = footprint(5, 60.0, 10.0);
    unknown.sensitivity = None;

    let all = vec![good, daytime, weak, single_mode_forest, far_from_dem, unknown];
    let (kept, rejected) = apply_quality_filters(all.clone(), &QualityCriteria::default());
    println!("kept {} of {}:", kept.len(), all.len());
    for r in &rejected {
        println!("  shot {} rejected: {}", r.footprint.shot_number, r.reason);
    }

    // permissive criteria keep everything, including the field-less shot
    let (kept, _) = apply_quality_filters(all.clone(), &QualityCriteria::permissive());
    println!("permissive criteria keep all {}", kept.len());

    // geoid alignment: a tilted separation surface over the scene
    let raster = GeoidRaster::from_fn(7, 5, 0.0, 0.0, 20.0, |x, y| 40.0 + 0.05 * x - 0.02 * y)?;
    let dir = tempdir()?;
    let path = dir.path().join("separation.asc");
    write_geoid_raster(&path, &raster)?;
    let raster = read_geoid_raster(&path)?; // same grid, round-tripped

    let (adjusted, out_of_grid) = geoid_adjust(all, &raster);
    println!("\ngeoid adjustment (ellipsoidal -> orthometric-aligned):");
    for (fp, undulation) in adjusted.iter().take(3) {
        println!(
            "  shot {}: undulation {undulation:+.2} m  ->  ground {:.2} m, top {:.2} m",
            fp.shot_number, fp.elev_lowestmode, fp.waveform.top_elevation
        );
    }
    println!("  footprints outside the grid: {}", out_of_grid.len());
    Ok(())
}
