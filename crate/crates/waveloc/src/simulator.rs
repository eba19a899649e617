//! Waveform simulation from airborne point neighborhoods.
//!
//! A footprint at (x, y) weights every point within the truncation radius by
//! a Gaussian of the horizontal distance, deposits the weights into vertical
//! elevation bins, and convolves the binned profile with the instrument's
//! Gaussian pulse. Ground is the lowest local maximum above the noise floor;
//! relative heights come from the cumulative energy profile measured upward
//! from the waveform bottom.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RhProfile, SimulatedMetrics, Waveform};
use crate::pointcloud::PointRecord;

/// Simulation parameters.
///
/// Defaults model a ~25 m footprint: Gaussian footprint sigma 5.5 m
/// truncated at 3 sigma, 1.0 m vertical pulse sigma, 0.15 m bins, and a
/// mode-detection floor of 1% of the peak amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub footprint_sigma_m: f64,
    /// Footprint truncation radius in sigmas.
    pub truncation_sigmas: f64,
    pub pulse_sigma_m: f64,
    pub bin_size_m: f64,
    /// Fraction of the peak amplitude below which bins do not count as
    /// detectable modes.
    pub noise_floor: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            footprint_sigma_m: 5.5,
            truncation_sigmas: 3.0,
            pulse_sigma_m: 1.0,
            bin_size_m: 0.15,
            noise_floor: 0.01,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.footprint_sigma_m > 0.0
            && self.truncation_sigmas > 0.0
            && self.pulse_sigma_m > 0.0
            && self.bin_size_m > 0.0
            && (0.0..1.0).contains(&self.noise_floor);
        if ok {
            Ok(())
        } else {
            Err(Error::Config("invalid simulation parameters".into()))
        }
    }

    /// Horizontal radius inside which points contribute.
    pub fn truncation_radius_m(&self) -> f64 {
        self.truncation_sigmas * self.footprint_sigma_m
    }
}

/// Simulate the waveform seen by a footprint centered at (x, y).
///
/// Returns `EmptyFootprint` when no point lies within the truncation radius.
/// The binned range pads four pulse sigmas above the highest and below the
/// lowest contributing point, so the convolution loses no energy.
pub fn simulate_waveform(
    points: &[PointRecord],
    x: f64,
    y: f64,
    params: &SimParams,
) -> Result<SimulatedMetrics> {
    params.validate()?;
    let radius = params.truncation_radius_m();
    let r2 = radius * radius;
    let inv_two_sigma2 = 1.0 / (2.0 * params.footprint_sigma_m * params.footprint_sigma_m);

    let mut contributors: Vec<(f64, f64)> = Vec::new(); // (z, weight)
    let mut z_lo = f64::INFINITY;
    let mut z_hi = f64::NEG_INFINITY;
    for p in points {
        let dx = p.x - x;
        let dy = p.y - y;
        let d2 = dx * dx + dy * dy;
        if d2 <= r2 {
            contributors.push((p.z, (-d2 * inv_two_sigma2).exp()));
            z_lo = z_lo.min(p.z);
            z_hi = z_hi.max(p.z);
        }
    }
    if contributors.is_empty() {
        return Err(Error::EmptyFootprint);
    }

    let bin = params.bin_size_m;
    let deposit_bins = ((z_hi - z_lo) / bin).round() as usize + 1;
    let kernel = pulse_kernel(params);
    let half = kernel.len() / 2;
    let n = deposit_bins + 2 * half;
    let top_elevation = z_hi + half as f64 * bin;

    let mut deposits = vec![0.0_f64; deposit_bins];
    for &(z, w) in &contributors {
        let i = (((z_hi - z) / bin).round() as usize).min(deposit_bins - 1);
        deposits[i] += w;
    }

    let mut amplitudes = vec![0.0_f64; n.max(2)];
    for (i, &d) in deposits.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        for (j, &k) in kernel.iter().enumerate() {
            amplitudes[i + j] += d * k;
        }
    }

    let waveform = Waveform {
        top_elevation,
        bin_size: bin,
        amplitudes,
    };
    let ground_elevation = extract_ground_elevation(&waveform, params)?;
    let rh = extract_rh_profile(&waveform, ground_elevation, params)?;
    Ok(SimulatedMetrics {
        offset: (0.0, 0.0),
        waveform,
        ground_elevation,
        rh,
    })
}

/// Discrete Gaussian pulse, truncated at four sigmas and renormalized to
/// unit sum so convolution conserves energy.
fn pulse_kernel(params: &SimParams) -> Vec<f64> {
    let bin = params.bin_size_m;
    let sigma = params.pulse_sigma_m;
    let half = (4.0 * sigma / bin).ceil() as i64;
    let mut kernel: Vec<f64> = (-half..=half)
        .map(|j| {
            let d = j as f64 * bin;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= total;
    }
    kernel
}

/// Indices of local maxima above the noise floor, top-down. Runs of equal
/// amplitude count once.
fn mode_indices(wf: &Waveform, params: &SimParams) -> Vec<usize> {
    let a = &wf.amplitudes;
    let peak = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Vec::new();
    }
    let floor = params.noise_floor * peak;
    let mut modes = Vec::new();
    for i in 0..a.len() {
        if a[i] <= floor {
            continue;
        }
        let left_ok = i == 0 || a[i] > a[i - 1];
        let right_ok = i == a.len() - 1 || a[i] >= a[i + 1];
        if left_ok && right_ok {
            modes.push(i);
        }
    }
    modes
}

/// Number of detectable modes (local maxima above the noise floor).
pub fn count_modes(wf: &Waveform, params: &SimParams) -> usize {
    mode_indices(wf, params).len()
}

/// Elevation of the lowest local maximum above the noise floor.
pub fn extract_ground_elevation(wf: &Waveform, params: &SimParams) -> Result<f64> {
    wf.validate()?;
    let modes = mode_indices(wf, params);
    match modes.last() {
        Some(&i) => Ok(wf.elevation_at(i)),
        None => Err(Error::NoDetectableMode),
    }
}

/// Relative heights at the standard percentiles.
///
/// The height at percentile p is the elevation at which the cumulative
/// energy, integrated upward from the waveform bottom, first reaches p% of
/// the total — linearly interpolated inside the crossing bin — minus the
/// ground elevation. RH0 is the bottom edge of the lowest energetic bin;
/// RH100 the top edge of the highest bin above the noise floor.
pub fn extract_rh_profile(wf: &Waveform, ground: f64, params: &SimParams) -> Result<RhProfile> {
    wf.validate()?;
    let a = &wf.amplitudes;
    let n = a.len();
    let total: f64 = a.iter().filter(|v| **v > 0.0).sum();
    if !(total > 0.0) {
        return Err(Error::EmptyWaveform);
    }
    let peak = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let floor = params.noise_floor * peak;
    let bin = wf.bin_size;

    // bottom-up view: element j is original bin n-1-j
    let amp_up = |j: usize| a[n - 1 - j].max(0.0);
    let bottom_edge = |j: usize| wf.elevation_at(n - 1 - j) - bin / 2.0;

    let lowest_energetic = (0..n).find(|&j| amp_up(j) > 0.0).unwrap();
    let highest_above_floor = (0..n).rev().find(|&j| amp_up(j) > floor);

    let percentiles = RhProfile::standard_percentiles();
    let mut heights = Vec::with_capacity(percentiles.len());
    let mut cum = 0.0;
    let mut j = 0;
    for &p in &percentiles {
        let h = match p {
            0 => bottom_edge(lowest_energetic),
            100 => {
                let k = highest_above_floor.unwrap_or(n - 1);
                bottom_edge(k) + bin
            }
            _ => {
                let target = p as f64 / 100.0 * total;
                while j < n && cum + amp_up(j) < target {
                    cum += amp_up(j);
                    j += 1;
                }
                if j >= n {
                    bottom_edge(n - 1) + bin
                } else {
                    bottom_edge(j) + bin * ((target - cum) / amp_up(j)).clamp(0.0, 1.0)
                }
            }
        };
        heights.push(h - ground);
    }
    Ok(RhProfile {
        percentiles,
        heights,
    })
}

/// Align a simulated waveform onto the reported waveform's bin centers by
/// linear interpolation; bins outside the simulated range read as zero.
/// Errors with `DisjointWaveforms` when the elevation ranges do not overlap
/// at all.
pub fn resample_to_common_grid(
    reported: &Waveform,
    simulated: &Waveform,
) -> Result<(Vec<f64>, Vec<f64>)> {
    reported.validate()?;
    simulated.validate()?;
    let rep_top = reported.top_elevation;
    let rep_bottom = reported.bottom_elevation();
    let sim_top = simulated.top_elevation;
    let sim_bottom = simulated.bottom_elevation();
    if sim_top < rep_bottom || sim_bottom > rep_top {
        return Err(Error::DisjointWaveforms);
    }

    let s = &simulated.amplitudes;
    let resampled: Vec<f64> = (0..reported.len())
        .map(|i| {
            let e = reported.elevation_at(i);
            let t = (sim_top - e) / simulated.bin_size;
            if t < 0.0 || t > (s.len() - 1) as f64 {
                return 0.0;
            }
            let i0 = t.floor() as usize;
            let frac = t - i0 as f64;
            if i0 + 1 < s.len() {
                s[i0] * (1.0 - frac) + s[i0 + 1] * frac
            } else {
                s[i0]
            }
        })
        .collect();
    Ok((reported.amplitudes.clone(), resampled))
}
