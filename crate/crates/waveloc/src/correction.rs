//! The offset search itself: simulate a waveform at every candidate offset
//! of a footprint, score the candidates, pool scores at orbit, beam, or
//! per-footprint (temporal cluster) granularity, select the winning offset,
//! and resimulate at the corrected position.
//!
//! Aggregation works on compact `ScoredFootprint` records so the expensive
//! per-candidate simulations never cross a worker boundary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    CorrectionMode, Footprint, InvalidReason, OffsetGrid, ScoredFootprint, SimulatedMetrics,
};
use crate::pointcloud::PointRecord;
use crate::scoring::{rh95_change_filter, score_candidates, MetricSet};
use crate::simulator::{simulate_waveform, SimParams};

/// Candidate lattice for the search. `span_m` must be positive and at least
/// one step wide; see `OffsetGrid` for the centered-lattice rounding rule.
pub fn generate_offset_grid(span_m: f64, step_m: f64) -> Result<OffsetGrid> {
    if !(span_m > 0.0) {
        return Err(Error::Config("grid span must be positive".into()));
    }
    if !(step_m > 0.0) {
        return Err(Error::Config("grid step must be positive".into()));
    }
    if span_m < step_m {
        return Err(Error::Config("grid span smaller than grid step".into()));
    }
    OffsetGrid::new(span_m, step_m)
}

/// Simulate the footprint at every candidate offset. Failed candidates
/// (no coverage, no detectable mode) come back as `None` in grid order.
pub fn simulate_candidates(
    fp: &Footprint,
    points: &[PointRecord],
    grid: &OffsetGrid,
    params: &SimParams,
) -> Vec<Option<SimulatedMetrics>> {
    grid.offsets()
        .iter()
        .map(|&(dx, dy)| {
            simulate_waveform(points, fp.x + dx, fp.y + dy, params)
                .ok()
                .map(|mut sim| {
                    sim.offset = (dx, dy);
                    sim
                })
        })
        .collect()
}

/// Full per-footprint pass: candidate simulation, vegetation-change screen,
/// scoring. Failures never propagate as errors; they are encoded in the
/// returned record.
pub fn process_footprint(
    fp: &Footprint,
    points: &[PointRecord],
    grid: &OffsetGrid,
    params: &SimParams,
    metrics: &MetricSet,
    rh95_threshold_m: f64,
) -> ScoredFootprint {
    process_footprint_detailed(fp, points, grid, params, metrics, rh95_threshold_m).0
}

/// Like `process_footprint`, but also hands back the per-candidate
/// simulations for callers that dump them.
pub fn process_footprint_detailed(
    fp: &Footprint,
    points: &[PointRecord],
    grid: &OffsetGrid,
    params: &SimParams,
    metrics: &MetricSet,
    rh95_threshold_m: f64,
) -> (ScoredFootprint, Vec<Option<SimulatedMetrics>>) {
    let candidates = simulate_candidates(fp, points, grid, params);
    if !rh95_change_filter(fp, &candidates, rh95_threshold_m) {
        return (
            ScoredFootprint::invalid(fp, InvalidReason::Rh95Change),
            candidates,
        );
    }
    let scored = score_candidates(fp, &candidates, metrics);
    (scored, candidates)
}

/// One selected offset together with how it was supported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetChoice {
    /// Canonical grid index of the winner.
    pub index: usize,
    pub offset: (f64, f64),
    /// Mean score at the winning offset.
    pub mean_score: f64,
    /// Number of footprints that contributed to the mean.
    pub support: usize,
}

/// True when candidate `b` beats `a`: higher mean score, then smaller
/// offset magnitude, then lexicographically smaller (dy, dx).
fn beats(grid: &OffsetGrid, a: (usize, f64), b: (usize, f64)) -> bool {
    if b.1 != a.1 {
        return b.1 > a.1;
    }
    let (ax, ay) = grid.offset(a.0);
    let (bx, by) = grid.offset(b.0);
    let na = ax * ax + ay * ay;
    let nb = bx * bx + by * by;
    if nb != na {
        return nb < na;
    }
    (by, bx) < (ay, ax)
}

fn choose(grid: &OffsetGrid, means: &[f64], support: usize) -> OffsetChoice {
    let mut best = (0usize, means[0]);
    for (i, &m) in means.iter().enumerate().skip(1) {
        if beats(grid, best, (i, m)) {
            best = (i, m);
        }
    }
    OffsetChoice {
        index: best.0,
        offset: grid.offset(best.0),
        mean_score: best.1,
        support,
    }
}

fn mean_scores<'a>(
    scored: impl Iterator<Item = &'a ScoredFootprint>,
    grid: &OffsetGrid,
) -> Option<(Vec<f64>, usize)> {
    let mut sums = vec![0.0_f64; grid.len()];
    let mut n = 0usize;
    for s in scored.filter(|s| s.valid) {
        debug_assert_eq!(s.scores.len(), grid.len());
        for (acc, v) in sums.iter_mut().zip(&s.scores) {
            *acc += v;
        }
        n += 1;
    }
    if n == 0 {
        return None;
    }
    for v in &mut sums {
        *v /= n as f64;
    }
    Some((sums, n))
}

/// One offset for the whole input: mean score per candidate over all valid
/// footprints, then argmax with the magnitude/lexicographic tie-break.
pub fn aggregate_orbit(scored: &[ScoredFootprint], grid: &OffsetGrid) -> Result<OffsetChoice> {
    let (means, n) = mean_scores(scored.iter(), grid).ok_or(Error::NothingToCorrect)?;
    Ok(choose(grid, &means, n))
}

/// Orbit aggregation applied independently per beam. Beams whose footprints
/// are all invalid map to `None` (left uncorrected).
pub fn aggregate_beam(
    scored: &[ScoredFootprint],
    grid: &OffsetGrid,
) -> BTreeMap<u8, Option<OffsetChoice>> {
    let mut beams: BTreeMap<u8, Vec<&ScoredFootprint>> = BTreeMap::new();
    for s in scored {
        beams.entry(s.beam_id).or_default().push(s);
    }
    beams
        .into_iter()
        .map(|(beam, members)| {
            let choice =
                mean_scores(members.into_iter(), grid).map(|(means, n)| choose(grid, &means, n));
            (beam, choice)
        })
        .collect()
}

/// Temporal pooling window for footprint-level correction. Zero is legal
/// and makes every cluster a singleton.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterWindow {
    pub time_window_s: f64,
}

impl ClusterWindow {
    pub fn new(time_window_s: f64) -> Result<Self> {
        if !time_window_s.is_finite() || time_window_s < 0.0 {
            return Err(Error::Config("time window must be finite and >= 0".into()));
        }
        Ok(ClusterWindow { time_window_s })
    }
}

/// Per-target sliding windows: `clusters[t]` holds the indices of all valid
/// footprints on the same beam as target `t` (itself included) whose
/// acquisition time differs by at most half the window. Invalid targets get
/// empty clusters.
pub fn cluster_footprints(scored: &[ScoredFootprint], window: ClusterWindow) -> Vec<Vec<usize>> {
    let half = window.time_window_s / 2.0;
    let mut by_beam: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, s) in scored.iter().enumerate() {
        if s.valid {
            by_beam.entry(s.beam_id).or_default().push(i);
        }
    }
    let mut clusters = vec![Vec::new(); scored.len()];
    for list in by_beam.values_mut() {
        list.sort_by(|&a, &b| {
            scored[a]
                .delta_time
                .partial_cmp(&scored[b].delta_time)
                .unwrap()
                .then(scored[a].shot_number.cmp(&scored[b].shot_number))
        });
        let times: Vec<f64> = list.iter().map(|&i| scored[i].delta_time).collect();
        let mut lo = 0usize;
        let mut hi = 0usize;
        for (k, &target) in list.iter().enumerate() {
            let t = times[k];
            while times[lo] < t - half {
                lo += 1;
            }
            if hi < k {
                hi = k;
            }
            while hi + 1 < list.len() && times[hi + 1] <= t + half {
                hi += 1;
            }
            clusters[target] = list[lo..=hi].to_vec();
        }
    }
    clusters
}

/// Per-footprint offsets: for each valid target, mean score per candidate
/// over its cluster, then the orbit argmax rule. The choice corrects only
/// the target; `support` records the cluster size.
pub fn aggregate_footprint(
    scored: &[ScoredFootprint],
    clusters: &[Vec<usize>],
    grid: &OffsetGrid,
) -> BTreeMap<u64, OffsetChoice> {
    let mut out = BTreeMap::new();
    for (t, s) in scored.iter().enumerate() {
        if !s.valid || clusters[t].is_empty() {
            continue;
        }
        let members = clusters[t].iter().map(|&i| &scored[i]);
        if let Some((means, n)) = mean_scores(members, grid) {
            out.insert(s.shot_number, choose(grid, &means, n));
        }
    }
    out
}

/// Final output record for one footprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionResult {
    pub shot_number: u64,
    pub beam_id: u8,
    pub mode: CorrectionMode,
    pub chosen_offset: (f64, f64),
    pub corrected_x: f64,
    pub corrected_y: f64,
    pub final_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_size: Option<usize>,
    /// Simulation at the corrected position; absent when discarded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulated: Option<SimulatedMetrics>,
    pub discarded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discard_reason: Option<String>,
}

impl CorrectionResult {
    /// A footprint left at its reported position with a recorded reason.
    pub fn discarded(fp: &Footprint, mode: CorrectionMode, reason: &str) -> Self {
        CorrectionResult {
            shot_number: fp.shot_number,
            beam_id: fp.beam_id,
            mode,
            chosen_offset: (0.0, 0.0),
            corrected_x: fp.x,
            corrected_y: fp.y,
            final_score: 0.0,
            cluster_size: None,
            simulated: None,
            discarded: true,
            discard_reason: Some(reason.to_string()),
        }
    }
}

/// One fresh simulation at the corrected position. A failure there (for
/// example no coverage after the shift) flags the result discarded rather
/// than erroring.
pub fn resimulate_and_emit(
    fp: &Footprint,
    mode: CorrectionMode,
    choice: &OffsetChoice,
    cluster_size: Option<usize>,
    points: &[PointRecord],
    params: &SimParams,
) -> CorrectionResult {
    let (dx, dy) = choice.offset;
    let corrected_x = fp.x + dx;
    let corrected_y = fp.y + dy;
    match simulate_waveform(points, corrected_x, corrected_y, params) {
        Ok(mut sim) => {
            sim.offset = choice.offset;
            CorrectionResult {
                shot_number: fp.shot_number,
                beam_id: fp.beam_id,
                mode,
                chosen_offset: choice.offset,
                corrected_x,
                corrected_y,
                final_score: choice.mean_score,
                cluster_size,
                simulated: Some(sim),
                discarded: false,
                discard_reason: None,
            }
        }
        Err(e) => CorrectionResult {
            shot_number: fp.shot_number,
            beam_id: fp.beam_id,
            mode,
            chosen_offset: choice.offset,
            corrected_x,
            corrected_y,
            final_score: choice.mean_score,
            cluster_size,
            simulated: None,
            discarded: true,
            discard_reason: Some(e.to_string()),
        },
    }
}
