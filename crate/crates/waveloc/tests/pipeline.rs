//! Batch-pipeline behavior that only shows up at the file level: per-file
//! fault isolation, footprint accounting, discard bookkeeping, and the
//! optional dump outputs.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use tempfile::tempdir;

use waveloc::engine::{
    read_correction_file, read_footprint_file, read_manifest, run_pipeline, write_footprint_file,
    RunConfig, MANIFEST_FILE_NAME,
};
use waveloc::scoring::MetricSet;
use waveloc::simulator::SimParams;
use waveloc::synthgen::{
    generate_orbit, generate_scene, JitterSpec, SceneSpec, Terrain, TrackSpec,
};

/// Small rolling scene with one four-shot track and no injected error:
/// every shot should come back corrected to exactly (0, 0).
fn build_small_inputs(root: &Path) -> (PathBuf, PathBuf) {
    let tiles = root.join("tiles");
    let scene = SceneSpec {
        extent_x_m: 150.0,
        extent_y_m: 150.0,
        tile_size_m: 75.0,
        terrain: Terrain::Sine {
            amplitude_m: 3.0,
            wavelength_m: 37.0,
        },
        trees: Vec::new(),
        ground_density_pts_m2: 1.0,
        seed: 9,
        ascii_tiles: false,
    };
    generate_scene(&scene, &tiles).unwrap();

    let footprints = root.join("footprints.jsonl");
    let summary = generate_orbit(
        &tiles,
        &[TrackSpec::new(1, (75.0, 30.0), (0.0, 1.0), 4)],
        &JitterSpec::none(),
        &SimParams::default(),
        &footprints,
        &root.join("truth.csv"),
    )
    .unwrap();
    assert_eq!(summary.n_written, 4);
    (tiles, footprints)
}

#[test]
fn granule_directory_isolates_corrupt_files() {
    let dir = tempdir().unwrap();
    let (tiles, footprints) = build_small_inputs(dir.path());
    let all = read_footprint_file(&footprints).unwrap();

    let granules = dir.path().join("granules");
    fs::create_dir(&granules).unwrap();
    write_footprint_file(&granules.join("a.jsonl"), &all[..2]).unwrap();
    write_footprint_file(&granules.join("b.jsonl"), &all[2..]).unwrap();
    fs::write(granules.join("c.jsonl"), "this is not a footprint\n").unwrap();

    let out = dir.path().join("out");
    let cfg = RunConfig::new(&tiles, &out).with_granules_dir(&granules);
    let outcome = run_pipeline(&cfg).unwrap();
    assert_eq!(outcome.exit_code(), 0, "partial success still exits 0");

    let manifest = read_manifest(&out.join(MANIFEST_FILE_NAME)).unwrap();
    assert_eq!(manifest.files.len(), 3);
    let status_of = |name: &str| {
        manifest
            .files
            .iter()
            .find(|f| f.input.ends_with(name))
            .unwrap_or_else(|| panic!("{name} missing from manifest"))
    };
    assert_eq!(status_of("a.jsonl").status, "ok");
    assert_eq!(status_of("b.jsonl").status, "ok");
    assert!(status_of("c.jsonl").status.starts_with("error: "));
    assert!(status_of("c.jsonl").outputs.is_empty());

    assert!(out.join("a.corrected.jsonl").exists());
    assert!(out.join("b.corrected.jsonl").exists());
    assert!(!out.join("c.corrected.jsonl").exists());

    // a directory with nothing but the corrupt file is a total failure
    let broken = dir.path().join("broken");
    fs::create_dir(&broken).unwrap();
    fs::write(broken.join("c.jsonl"), "this is not a footprint\n").unwrap();
    let cfg = RunConfig::new(&tiles, dir.path().join("out2")).with_granules_dir(&broken);
    assert_eq!(run_pipeline(&cfg).unwrap().exit_code(), 1);
}

#[test]
fn every_footprint_appears_exactly_once_with_zero_error_recovered() {
    let dir = tempdir().unwrap();
    let (tiles, footprints) = build_small_inputs(dir.path());

    let out = dir.path().join("out");
    let mut cfg = RunConfig::new(&tiles, &out).with_input_file(&footprints);
    cfg.criteria = MetricSet::parse("kl").unwrap();
    run_pipeline(&cfg).unwrap();

    let inputs: Vec<u64> = read_footprint_file(&footprints)
        .unwrap()
        .iter()
        .map(|fp| fp.shot_number)
        .collect();
    let results = read_correction_file(&out.join("footprints.corrected.jsonl")).unwrap();
    let output_shots: Vec<u64> = results.iter().map(|r| r.shot_number).collect();
    assert_eq!(
        output_shots,
        inputs,
        "every input shot exactly once, in shot order"
    );
    for r in &results {
        assert!(!r.discarded);
        assert_eq!(r.chosen_offset, (0.0, 0.0), "nothing to undo for shot {}", r.shot_number);
    }

    let manifest = read_manifest(&out.join(MANIFEST_FILE_NAME)).unwrap();
    let file = &manifest.files[0];
    assert_eq!(file.n_input, 4);
    assert_eq!(file.n_corrected, 4);
    assert_eq!(
        file.n_rejected_quality + file.n_no_datum + file.n_out_of_coverage + file.n_invalid,
        0
    );
}

#[test]
fn footprint_outside_tiles_is_discarded_as_out_of_coverage() {
    let dir = tempdir().unwrap();
    let (tiles, footprints) = build_small_inputs(dir.path());

    let mut all = read_footprint_file(&footprints).unwrap();
    let mut stray = all[0].clone();
    stray.shot_number = 99;
    stray.x = 5000.0;
    all.push(stray);
    let mixed = dir.path().join("mixed.jsonl");
    write_footprint_file(&mixed, &all).unwrap();

    let out = dir.path().join("out");
    let mut cfg = RunConfig::new(&tiles, &out).with_input_file(&mixed);
    cfg.criteria = MetricSet::parse("kl").unwrap();
    run_pipeline(&cfg).unwrap();

    let results = read_correction_file(&out.join("mixed.corrected.jsonl")).unwrap();
    let stray_row = results.iter().find(|r| r.shot_number == 99).unwrap();
    assert!(stray_row.discarded);
    assert_eq!(stray_row.discard_reason.as_deref(), Some("out of coverage"));
    assert_eq!(stray_row.chosen_offset, (0.0, 0.0), "left where it was");
    assert!(results.iter().filter(|r| r.shot_number != 99).all(|r| !r.discarded));

    let manifest = read_manifest(&out.join(MANIFEST_FILE_NAME)).unwrap();
    assert_eq!(manifest.files[0].n_out_of_coverage, 1);
    assert_eq!(manifest.files[0].n_corrected, 4);
}

#[test]
fn optional_dumps_cover_every_candidate_and_corrected_shot() {
    let dir = tempdir().unwrap();
    let (tiles, footprints) = build_small_inputs(dir.path());

    let out = dir.path().join("out");
    let mut cfg = RunConfig::new(&tiles, &out).with_input_file(&footprints);
    cfg.criteria = MetricSet::parse("kl").unwrap();
    cfg.save_sim_points = true;
    cfg.save_origin_location = true;
    run_pipeline(&cfg).unwrap();

    let results = read_correction_file(&out.join("footprints.corrected.jsonl")).unwrap();
    let corrected: BTreeSet<u64> = results
        .iter()
        .filter(|r| !r.discarded)
        .map(|r| r.shot_number)
        .collect();
    assert_eq!(corrected.len(), 4);

    // one simulation row per candidate per scored footprint (default grid:
    // 31 x 31 offsets)
    let sim_text = fs::read_to_string(out.join("footprints.sim_points.jsonl")).unwrap();
    let mut rows_per_shot: std::collections::BTreeMap<u64, usize> = Default::default();
    for line in sim_text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        *rows_per_shot
            .entry(v["shot_number"].as_u64().unwrap())
            .or_default() += 1;
    }
    assert_eq!(rows_per_shot.keys().copied().collect::<BTreeSet<_>>(), corrected);
    for (shot, n) in rows_per_shot {
        assert_eq!(n, 961, "shot {shot} has {n} candidate rows");
    }

    // one origin row per corrected shot, carrying the uncorrected position
    let originals = read_footprint_file(&footprints).unwrap();
    let origin_text = fs::read_to_string(out.join("footprints.origin.jsonl")).unwrap();
    let mut origin_shots = BTreeSet::new();
    for line in origin_text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let shot = v["shot_number"].as_u64().unwrap();
        let fp = originals.iter().find(|f| f.shot_number == shot).unwrap();
        assert_eq!(v["x"].as_f64().unwrap(), fp.x);
        assert_eq!(v["y"].as_f64().unwrap(), fp.y);
        origin_shots.insert(shot);
    }
    assert_eq!(origin_shots, corrected);
}

#[test]
fn quality_screen_can_be_disabled() {
    let dir = tempdir().unwrap();
    let (tiles, footprints) = build_small_inputs(dir.path());

    let mut all = read_footprint_file(&footprints).unwrap();
    all[1].quality_flag = Some(0);
    let flagged = dir.path().join("flagged.jsonl");
    write_footprint_file(&flagged, &all).unwrap();
    let bad_shot = all[1].shot_number;

    let out = dir.path().join("out_screened");
    let mut cfg = RunConfig::new(&tiles, &out).with_input_file(&flagged);
    cfg.criteria = MetricSet::parse("kl").unwrap();
    run_pipeline(&cfg).unwrap();
    let results = read_correction_file(&out.join("flagged.corrected.jsonl")).unwrap();
    let row = results.iter().find(|r| r.shot_number == bad_shot).unwrap();
    assert!(row.discarded);
    assert_eq!(row.discard_reason.as_deref(), Some("quality flag"));
    let manifest = read_manifest(&out.join(MANIFEST_FILE_NAME)).unwrap();
    assert_eq!(manifest.files[0].n_rejected_quality, 1);

    let out = dir.path().join("out_unscreened");
    let mut cfg = RunConfig::new(&tiles, &out).with_input_file(&flagged);
    cfg.criteria = MetricSet::parse("kl").unwrap();
    cfg.disable_quality_filters = true;
    run_pipeline(&cfg).unwrap();
    let results = read_correction_file(&out.join("flagged.corrected.jsonl")).unwrap();
    assert!(results.iter().all(|r| !r.discarded));
}
