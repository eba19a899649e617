//! Accuracy statistics comparing reported and simulated quantities, plus
//! the machine-readable report and scatter files the pipeline emits.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::correction::CorrectionResult;
use crate::error::{Error, Result};
use crate::model::{CorrectionMode, Footprint, RhProfile};

/// Coefficient of determination, 1 - SS_res / SS_tot. Negative when the
/// predictor does worse than the reported mean.
pub fn r_squared(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch(y.len(), yhat.len()));
    }
    if y.len() < 2 {
        return Err(Error::ZeroVariance);
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Root mean squared residual in the units of the inputs.
pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch(y.len(), yhat.len()));
    }
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ss: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / y.len() as f64).sqrt())
}

/// RMSE relative to the mean reported value, in percent.
pub fn rrmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    let e = rmse(y, yhat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    if mean == 0.0 {
        return Err(Error::UndefinedRrmse);
    }
    Ok(e / mean * 100.0)
}

/// RH95 minus RH50: a vertical-structure indicator sensitive to waveform
/// shape rather than canopy top alone.
pub fn delta_rh(rh: &RhProfile) -> Result<f64> {
    let h95 = rh.height(95).ok_or(Error::MissingPercentile(95))?;
    let h50 = rh.height(50).ok_or(Error::MissingPercentile(50))?;
    Ok(h95 - h50)
}

/// Statistics for one compared variable. Entries are `None` where the data
/// did not support them (fewer than two points, zero variance, zero mean).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableStats {
    pub variable: String,
    pub n: usize,
    pub r_squared: Option<f64>,
    pub rmse_m: Option<f64>,
    pub rrmse_pct: Option<f64>,
}

/// Whole-run accuracy summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub mode: Option<CorrectionMode>,
    pub n_results: usize,
    pub n_corrected: usize,
    pub n_discarded: usize,
    pub mean_offset_magnitude_m: Option<f64>,
    pub variables: Vec<VariableStats>,
}

/// One reported-vs-simulated point for scatter output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterRow {
    pub shot_number: u64,
    pub reported: f64,
    pub simulated: f64,
    pub mode: CorrectionMode,
}

/// Report plus the per-variable point data behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub report: AccuracyReport,
    /// Keyed by variable name; rows sorted by shot_number.
    pub scatter: BTreeMap<String, Vec<ScatterRow>>,
}

fn stats_for(variable: &str, rows: &[ScatterRow]) -> VariableStats {
    let y: Vec<f64> = rows.iter().map(|r| r.reported).collect();
    let yhat: Vec<f64> = rows.iter().map(|r| r.simulated).collect();
    VariableStats {
        variable: variable.to_string(),
        n: rows.len(),
        r_squared: r_squared(&y, &yhat).ok(),
        rmse_m: rmse(&y, &yhat).ok(),
        rrmse_pct: rrmse(&y, &yhat).ok(),
    }
}

/// Compare each corrected footprint's reported RH95, ΔRH95−50, and ground
/// elevation against the resimulation at its corrected position. Discarded
/// results are counted but excluded from every statistic.
pub fn build_report(results: &[CorrectionResult], originals: &[Footprint]) -> ReportBundle {
    let by_shot: BTreeMap<u64, &Footprint> =
        originals.iter().map(|fp| (fp.shot_number, fp)).collect();
    let mut sorted: Vec<&CorrectionResult> = results.iter().collect();
    sorted.sort_by_key(|r| r.shot_number);

    let mut rh95 = Vec::new();
    let mut drh = Vec::new();
    let mut terrain = Vec::new();
    let mut offset_mags = Vec::new();
    let mut n_corrected = 0usize;
    let mut n_discarded = 0usize;
    let mut mode = None;
    for r in &sorted {
        mode.get_or_insert(r.mode);
        if r.discarded {
            n_discarded += 1;
            continue;
        }
        n_corrected += 1;
        let (dx, dy) = r.chosen_offset;
        offset_mags.push((dx * dx + dy * dy).sqrt());
        let (fp, sim) = match (by_shot.get(&r.shot_number), r.simulated.as_ref()) {
            (Some(fp), Some(sim)) => (*fp, sim),
            _ => continue,
        };
        let row = |reported, simulated| ScatterRow {
            shot_number: r.shot_number,
            reported,
            simulated,
            mode: r.mode,
        };
        if let (Some(a), Some(b)) = (fp.rh.height(95), sim.rh.height(95)) {
            rh95.push(row(a, b));
        }
        if let (Ok(a), Ok(b)) = (delta_rh(&fp.rh), delta_rh(&sim.rh)) {
            drh.push(row(a, b));
        }
        terrain.push(row(fp.elev_lowestmode, sim.ground_elevation));
    }

    let mean_offset = if offset_mags.is_empty() {
        None
    } else {
        Some(offset_mags.iter().sum::<f64>() / offset_mags.len() as f64)
    };
    let variables = vec![
        stats_for("rh95", &rh95),
        stats_for("drh95_50", &drh),
        stats_for("terrain", &terrain),
    ];
    let mut scatter = BTreeMap::new();
    scatter.insert("rh95".to_string(), rh95);
    scatter.insert("drh95_50".to_string(), drh);
    scatter.insert("terrain".to_string(), terrain);

    ReportBundle {
        report: AccuracyReport {
            mode,
            n_results: results.len(),
            n_corrected,
            n_discarded,
            mean_offset_magnitude_m: mean_offset,
            variables,
        },
        scatter,
    }
}

/// Pretty-printed JSON report document.
pub fn write_report_json(path: &Path, report: &AccuracyReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Scatter rows as CSV with a fixed header.
pub fn write_scatter_csv(path: &Path, rows: &[ScatterRow]) -> Result<()> {
    let mut out = String::from("shot_number,reported,simulated,mode\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.shot_number, r.reported, r.simulated, r.mode
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SimulatedMetrics, Waveform};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn r_squared_pinned_cases() {
        let y = [1.0, 2.0, 3.0, 4.0];
        assert!((r_squared(&y, &y).unwrap() - 1.0).abs() < 1e-15);

        let at_mean = [2.5; 4];
        assert!(r_squared(&y, &at_mean).unwrap().abs() < 1e-15);

        let yhat = [1.1, 1.9, 3.2, 3.8];
        let got = r_squared(&y, &yhat).unwrap();
        assert!((got - 0.98).abs() < 1e-12, "{got}");

        // worse than the mean predictor goes negative
        assert!(r_squared(&[1.0, 2.0], &[10.0, -10.0]).unwrap() < 0.0);

        assert!(matches!(
            r_squared(&[3.0, 3.0, 3.0], &[1.0, 2.0, 3.0]),
            Err(Error::ZeroVariance)
        ));
        assert!(matches!(r_squared(&[1.0], &[1.0]), Err(Error::ZeroVariance)));
    }

    #[test]
    fn rmse_pinned_cases() {
        let y = [5.0, 6.0, 7.0];
        assert_eq!(rmse(&y, &y).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[2.0, -2.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - (12.5_f64).sqrt()).abs() < 1e-12);
        assert!(matches!(rmse(&[], &[]), Err(Error::EmptyInput)));
        assert!(matches!(
            rmse(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn rmse_squared_times_n_is_residual_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.gen_range(1..80);
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let yhat: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let e = rmse(&y, &yhat).unwrap();
            let ss: f64 = y.iter().zip(&yhat).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!((e * e * n as f64 - ss).abs() <= 1e-12 * ss.max(1.0));
        }
    }

    #[test]
    fn shift_invariance_of_r_squared_and_rmse() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let n = rng.gen_range(3..40);
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let yhat: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let c = rng.gen_range(-100.0..100.0);
            let ys: Vec<f64> = y.iter().map(|v| v + c).collect();
            let yhs: Vec<f64> = yhat.iter().map(|v| v + c).collect();
            if let (Ok(a), Ok(b)) = (r_squared(&y, &yhat), r_squared(&ys, &yhs)) {
                assert!((a - b).abs() < 1e-9);
            }
            let (ea, eb) = (rmse(&y, &yhat).unwrap(), rmse(&ys, &yhs).unwrap());
            assert!((ea - eb).abs() < 1e-9);
        }
    }

    #[test]
    fn rrmse_pinned_cases() {
        let y = [8.0, 8.0];
        let yhat = [10.0, 6.0];
        assert!((rrmse(&y, &yhat).unwrap() - 25.0).abs() < 1e-12);
        assert_eq!(rrmse(&y, &y).unwrap(), 0.0);
        assert!(matches!(
            rrmse(&[-1.0, 1.0], &[0.0, 0.0]),
            Err(Error::UndefinedRrmse)
        ));
    }

    #[test]
    fn rrmse_back_computation_matches_published_scale() {
        // residuals of exactly ±2.62 m around a mean of 6.0747 m
        let y = [4.0747, 8.0747, 5.0747, 7.0747];
        let yhat: Vec<f64> = y
            .iter()
            .enumerate()
            .map(|(i, v)| v + if i % 2 == 0 { 2.62 } else { -2.62 })
            .collect();
        let e = rmse(&y, &yhat).unwrap();
        assert!((e - 2.62).abs() < 1e-12);
        let pct = rrmse(&y, &yhat).unwrap();
        assert!((pct - 43.13).abs() < 0.01, "{pct}");
        // inverting the published pair must land on the same mean
        let implied_mean = 2.62_f64 / 43.13 * 100.0;
        assert!((implied_mean - 6.074).abs() < 0.01);
        let actual_mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((implied_mean - actual_mean).abs() < 0.01);
    }

    #[test]
    fn delta_rh_is_rh95_minus_rh50() {
        let rh = RhProfile {
            percentiles: vec![0, 50, 95, 100],
            heights: vec![-1.0, 6.0, 14.0, 16.0],
        };
        assert_eq!(delta_rh(&rh).unwrap(), 8.0);
        let narrow = RhProfile {
            percentiles: vec![50, 95],
            heights: vec![2.0, 2.0],
        };
        assert_eq!(delta_rh(&narrow).unwrap(), 0.0);
        let missing = RhProfile {
            percentiles: vec![95],
            heights: vec![5.0],
        };
        assert!(matches!(delta_rh(&missing), Err(Error::MissingPercentile(50))));
    }

    // -- report assembly ------------------------------------------------------

    fn profile(rh50: f64, rh95: f64) -> RhProfile {
        RhProfile {
            percentiles: vec![0, 50, 95, 100],
            heights: vec![-0.5, rh50, rh95, rh95 + 1.0],
        }
    }

    fn original(shot: u64, elev: f64, rh95: f64) -> Footprint {
        Footprint {
            shot_number: shot,
            beam_id: 0,
            delta_time: shot as f64,
            x: 0.0,
            y: 0.0,
            elev_lowestmode: elev,
            rh: profile(rh95 / 2.0, rh95),
            waveform: Waveform::new(elev + 20.0, 0.15, vec![0.1, 1.0, 0.2]).unwrap(),
            sensitivity: Some(0.95),
            quality_flag: Some(1),
            degrade_flag: Some(0),
            solar_elevation: Some(-5.0),
            num_detected_modes: Some(2),
            dem_elevation: Some(elev),
        }
    }

    fn result(shot: u64, elev: f64, rh95: f64, offset: (f64, f64)) -> CorrectionResult {
        CorrectionResult {
            shot_number: shot,
            beam_id: 0,
            mode: CorrectionMode::Orbit,
            chosen_offset: offset,
            corrected_x: offset.0,
            corrected_y: offset.1,
            final_score: 0.9,
            cluster_size: None,
            simulated: Some(SimulatedMetrics {
                offset,
                waveform: Waveform::new(elev + 20.0, 0.15, vec![0.1, 1.0, 0.2]).unwrap(),
                ground_elevation: elev,
                rh: profile(rh95 / 2.0, rh95),
            }),
            discarded: false,
            discard_reason: None,
        }
    }

    #[test]
    fn perfect_agreement_scores_unity() {
        let originals: Vec<Footprint> = (0..8)
            .map(|i| original(i, 100.0 + i as f64, 5.0 + i as f64))
            .collect();
        let results: Vec<CorrectionResult> = (0..8)
            .map(|i| result(i, 100.0 + i as f64, 5.0 + i as f64, (3.0, -4.0)))
            .collect();
        let bundle = build_report(&results, &originals);
        let report = &bundle.report;
        assert_eq!(report.n_corrected, 8);
        assert_eq!(report.n_discarded, 0);
        assert!((report.mean_offset_magnitude_m.unwrap() - 5.0).abs() < 1e-12);
        for v in &report.variables {
            assert_eq!(v.n, 8, "{}", v.variable);
            assert!((v.r_squared.unwrap() - 1.0).abs() < 1e-9, "{}", v.variable);
            assert!(v.rmse_m.unwrap() < 1e-12);
        }
        assert_eq!(bundle.scatter["rh95"].len(), 8);
    }

    #[test]
    fn discarded_results_are_counted_but_excluded() {
        let originals = vec![original(1, 100.0, 8.0), original(2, 101.0, 9.0)];
        let mut results = vec![result(1, 100.0, 8.0, (1.0, 0.0))];
        results.push(CorrectionResult::discarded(
            &originals[1],
            CorrectionMode::Orbit,
            "rh95 change",
        ));
        let bundle = build_report(&results, &originals);
        assert_eq!(bundle.report.n_corrected, 1);
        assert_eq!(bundle.report.n_discarded, 1);
        assert_eq!(bundle.scatter["terrain"].len(), 1);
        // a single point cannot support r_squared; rmse still defined
        let terrain = &bundle.report.variables[2];
        assert_eq!(terrain.variable, "terrain");
        assert_eq!(terrain.r_squared, None);
        assert!(terrain.rmse_m.is_some());
    }

    #[test]
    fn report_is_independent_of_input_order() {
        let originals: Vec<Footprint> = (0..10)
            .map(|i| original(i, 90.0 + i as f64, 4.0 + (i % 4) as f64))
            .collect();
        let mut results: Vec<CorrectionResult> = (0..10)
            .map(|i| {
                result(
                    i,
                    90.0 + i as f64 + 0.3,
                    4.2 + (i % 4) as f64,
                    (i as f64 % 3.0, 1.0),
                )
            })
            .collect();
        let a = build_report(&results, &originals);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        results.shuffle(&mut rng);
        let b = build_report(&results, &originals);
        assert_eq!(a, b);
    }

    #[test]
    fn report_and_scatter_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let originals = vec![original(1, 100.0, 8.0), original(2, 101.0, 9.0)];
        let results = vec![
            result(1, 100.1, 8.2, (1.0, 0.0)),
            result(2, 100.9, 9.1, (1.0, 0.0)),
        ];
        let bundle = build_report(&results, &originals);

        let report_path = dir.path().join("accuracy_report.json");
        write_report_json(&report_path, &bundle.report).unwrap();
        let text = std::fs::read_to_string(&report_path).unwrap();
        let back: AccuracyReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, bundle.report);

        let scatter_path = dir.path().join("rh95_scatter.csv");
        write_scatter_csv(&scatter_path, &bundle.scatter["rh95"]).unwrap();
        let text = std::fs::read_to_string(&scatter_path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("shot_number,reported,simulated,mode"));
        assert_eq!(lines.count(), 2);
        assert!(text.contains("1,8,8.2,orbit"));
    }
}
