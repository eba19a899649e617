//! Similarity metrics between reported and simulated waveforms, and the
//! per-footprint candidate scoring that turns raw metric values into [0, 1]
//! scores over an offset grid.
//!
//! Raw metrics keep their natural orientation (correlations: bigger is
//! better; distances and divergences: smaller is better). `score_candidates`
//! maps every metric onto [0, 1] by direction-corrected min-max
//! normalization over the candidate grid, so metrics are commensurable
//! before averaging and each metric's candidate ranking is preserved.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Footprint, InvalidReason, RhProfile, ScoredFootprint, SimulatedMetrics, Waveform};
use crate::simulator::resample_to_common_grid;

/// Smoothing constant added to every bin before KL divergence.
pub const KL_EPSILON: f64 = 1e-12;

/// Tolerance on "sums to one" for probability inputs.
const DISTRIBUTION_TOL: f64 = 1e-6;

/// One similarity criterion. The names are the CLI vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    WavePearson,
    WaveSpearman,
    Kl,
    WaveDistance,
    Terrain,
    RhDistance,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::WavePearson,
        Metric::WaveSpearman,
        Metric::Kl,
        Metric::WaveDistance,
        Metric::Terrain,
        Metric::RhDistance,
    ];

    /// True when smaller raw values mean better agreement.
    fn smaller_is_better(self) -> bool {
        !matches!(self, Metric::WavePearson | Metric::WaveSpearman)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::WavePearson => "wave_pearson",
            Metric::WaveSpearman => "wave_spearman",
            Metric::Kl => "kl",
            Metric::WaveDistance => "wave_distance",
            Metric::Terrain => "terrain",
            Metric::RhDistance => "rh_distance",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wave_pearson" => Ok(Metric::WavePearson),
            "wave_spearman" => Ok(Metric::WaveSpearman),
            "kl" => Ok(Metric::Kl),
            "wave_distance" => Ok(Metric::WaveDistance),
            "terrain" => Ok(Metric::Terrain),
            "rh_distance" => Ok(Metric::RhDistance),
            other => Err(Error::Config(format!("unknown metric: {other}"))),
        }
    }
}

/// Ordered, duplicate-free selection of metrics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricSet(Vec<Metric>);

impl MetricSet {
    pub fn new(metrics: Vec<Metric>) -> Result<Self> {
        if metrics.is_empty() {
            return Err(Error::Config("empty metric set".into()));
        }
        for (i, m) in metrics.iter().enumerate() {
            if metrics[..i].contains(m) {
                return Err(Error::Config(format!("duplicate metric: {m}")));
            }
        }
        Ok(MetricSet(metrics))
    }

    /// Parse a space-separated metric list, e.g. `"kl terrain"`.
    pub fn parse(s: &str) -> Result<Self> {
        let metrics: Vec<Metric> = s
            .split_whitespace()
            .map(Metric::from_str)
            .collect::<Result<_>>()?;
        MetricSet::new(metrics)
    }

    pub fn metrics(&self) -> &[Metric] {
        &self.0
    }

    pub fn contains(&self, m: Metric) -> bool {
        self.0.contains(&m)
    }
}

impl Default for MetricSet {
    fn default() -> Self {
        MetricSet(vec![Metric::WavePearson])
    }
}

impl fmt::Display for MetricSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

fn check_finite(xs: &[f64]) -> Result<()> {
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateWaveform);
    }
    Ok(())
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    Ok(())
}

/// Clamp negatives, add epsilon everywhere, divide by the sum. The result is
/// strictly positive and sums to one.
pub fn normalize_probability(amplitudes: &[f64]) -> Result<Vec<f64>> {
    check_finite(amplitudes)?;
    if !amplitudes.iter().any(|&a| a > 0.0) {
        return Err(Error::DegenerateWaveform);
    }
    let mut p: Vec<f64> = amplitudes
        .iter()
        .map(|&a| a.max(0.0) + KL_EPSILON)
        .collect();
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    Ok(p)
}

/// Waveform amplitudes as a probability distribution.
pub fn normalize_to_distribution(w: &Waveform) -> Result<Vec<f64>> {
    normalize_probability(&w.amplitudes)
}

/// Product-moment correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    check_finite(a)?;
    check_finite(b)?;
    let n = a.len();
    if n < 2 {
        return Err(Error::ConstantInput);
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let (ma, mb) = (mean(a), mean(b));
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..n {
        let da = a[i] - ma;
        let db = b[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties assigned their average rank.
fn fractional_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Rank correlation: Pearson over fractional ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    check_finite(a)?;
    check_finite(b)?;
    pearson(&fractional_ranks(a), &fractional_ranks(b))
}

/// Curve root sum squared differential area: the Euclidean norm of the
/// difference between two aligned sequences.
pub fn crssda(r: &[f64], s: &[f64]) -> Result<f64> {
    check_lengths(r, s)?;
    Ok(r.iter()
        .zip(s)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Kullback-Leibler divergence (natural log) between two strictly positive
/// distributions that each sum to one.
pub fn kl_divergence(r: &[f64], s: &[f64]) -> Result<f64> {
    check_lengths(r, s)?;
    for xs in [r, s] {
        let sum: f64 = xs.iter().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_TOL || xs.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::NotADistribution);
        }
    }
    Ok(r.iter()
        .zip(s)
        .map(|(&ri, &si)| ri * (ri / si).ln())
        .sum::<f64>()
        .max(0.0))
}

/// Absolute ground elevation distance.
pub fn aged(zg_r: f64, zg_s: f64) -> f64 {
    (zg_r - zg_s).abs()
}

/// Root sum squared difference over relative heights at percentiles
/// 25, 30, ..., 100 (16 terms).
pub fn rh_distance(r: &RhProfile, s: &RhProfile) -> Result<f64> {
    let mut sum = 0.0;
    for p in (25..=100).step_by(5) {
        let a = r.height(p).ok_or(Error::MissingPercentile(p))?;
        let b = s.height(p).ok_or(Error::MissingPercentile(p))?;
        sum += (a - b) * (a - b);
    }
    Ok(sum.sqrt())
}

/// Unit-energy copy of a sequence, or `None` when it has no positive mass.
fn unit_energy(xs: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = xs.iter().map(|&v| v.max(0.0)).sum();
    if !(total > 0.0) {
        return None;
    }
    Some(xs.iter().map(|&v| v.max(0.0) / total).collect())
}

/// Direction-corrected min-max mapping of raw metric values onto [0, 1].
///
/// `None` entries are failed candidates: they score 0 and do not contribute
/// to the min/max. When every raw value is identical all valid candidates
/// score 1.
fn min_max_scores(raw: &[Option<f64>], smaller_is_better: bool) -> Vec<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in raw.iter().flatten() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    raw.iter()
        .map(|v| match v {
            None => 0.0,
            Some(v) => {
                if hi == lo {
                    1.0
                } else if smaller_is_better {
                    1.0 - (v - lo) / (hi - lo)
                } else {
                    (v - lo) / (hi - lo)
                }
            }
        })
        .collect()
}

/// Score every candidate of one footprint on the selected metrics.
///
/// Waveform metrics run on the simulated waveform resampled onto the
/// reported bins; a candidate whose raw value cannot be computed (no
/// overlap, constant sequence, no positive energy) scores 0 for that metric
/// only. A candidate with no simulation at all scores 0 everywhere. The
/// final per-candidate score is the arithmetic mean over metrics.
pub fn score_candidates(
    fp: &Footprint,
    candidates: &[Option<SimulatedMetrics>],
    metrics: &MetricSet,
) -> ScoredFootprint {
    if candidates.iter().all(|c| c.is_none()) {
        return ScoredFootprint::invalid(fp, InvalidReason::EmptyFootprint);
    }

    let needs_resample = metrics.metrics().iter().any(|m| {
        matches!(
            m,
            Metric::WavePearson | Metric::WaveSpearman | Metric::Kl | Metric::WaveDistance
        )
    });
    let resampled: Vec<Option<Vec<f64>>> = candidates
        .iter()
        .map(|c| {
            let c = c.as_ref()?;
            if !needs_resample {
                return None;
            }
            resample_to_common_grid(&fp.waveform, &c.waveform)
                .ok()
                .map(|(_, s)| s)
        })
        .collect();
    let reported_amps = &fp.waveform.amplitudes;
    let reported_dist = normalize_probability(reported_amps).ok();
    let reported_unit = unit_energy(reported_amps);

    let mut final_scores = vec![0.0; candidates.len()];
    for &metric in metrics.metrics() {
        let raw: Vec<Option<f64>> = candidates
            .iter()
            .enumerate()
            .map(|(i, cand)| {
                let cand = cand.as_ref()?;
                match metric {
                    Metric::WavePearson => {
                        pearson(reported_amps, resampled[i].as_ref()?).ok()
                    }
                    Metric::WaveSpearman => {
                        spearman(reported_amps, resampled[i].as_ref()?).ok()
                    }
                    Metric::Kl => {
                        let s = normalize_probability(resampled[i].as_ref()?).ok()?;
                        kl_divergence(reported_dist.as_ref()?, &s).ok()
                    }
                    Metric::WaveDistance => {
                        let s = unit_energy(resampled[i].as_ref()?)?;
                        crssda(reported_unit.as_ref()?, &s).ok()
                    }
                    Metric::Terrain => Some(aged(fp.elev_lowestmode, cand.ground_elevation)),
                    Metric::RhDistance => rh_distance(&fp.rh, &cand.rh).ok(),
                }
            })
            .collect();
        // correlations move onto [0,1] before the stretch so ties at
        // v_max == v_min map to 1 in the same orientation
        let oriented: Vec<Option<f64>> = if metric.smaller_is_better() {
            raw
        } else {
            raw.iter().map(|v| v.map(|r| (r + 1.0) / 2.0)).collect()
        };
        let scores = min_max_scores(&oriented, metric.smaller_is_better());
        for (f, s) in final_scores.iter_mut().zip(&scores) {
            *f += s;
        }
    }
    let k = metrics.metrics().len() as f64;
    for f in &mut final_scores {
        *f /= k;
    }

    ScoredFootprint {
        shot_number: fp.shot_number,
        beam_id: fp.beam_id,
        delta_time: fp.delta_time,
        scores: final_scores,
        valid: true,
        invalid_reason: None,
    }
}

/// Keep (true) or discard (false) a footprint by comparing its reported RH95
/// against the mean simulated RH95 over valid candidates. The comparison is
/// strict: a difference exactly at the threshold keeps the footprint.
pub fn rh95_change_filter(
    fp: &Footprint,
    candidates: &[Option<SimulatedMetrics>],
    threshold_m: f64,
) -> bool {
    let reported = match fp.rh.height(95) {
        Some(h) => h,
        None => return true,
    };
    let mut sum = 0.0;
    let mut n = 0usize;
    for c in candidates.iter().flatten() {
        if let Some(h) = c.rh.height(95) {
            sum += h;
            n += 1;
        }
    }
    if n == 0 {
        return true;
    }
    (reported - sum / n as f64).abs() <= threshold_m
}
