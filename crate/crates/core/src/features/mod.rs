//! The 437-dimension feature extractor feeding the NSR/O post-classifier.
//!
//! Categories, in registry order: signal quality (2), frequency content
//! (10), beat-to-beat interval (11), reconstructed phase space occupancy
//! plus spatial filling index (401), and Poincare-section crossing
//! statistics (13). Any feature may be missing; missing values propagate to
//! the abstaining classifier instead of raising errors.

pub mod registry;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::Error;
use crate::qrs::rr_intervals_ms;
use crate::signal::normalize_unit;
use crate::sqi;
use crate::Result;

pub use registry::{feature_names, BAND_EDGES_HZ, CATEGORY_OFFSETS, CATEGORY_SIZES, FEATURE_COUNT};

/// 437 named reals, any of which may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<Option<f64>>,
}

impl FeatureVector {
    pub fn from_values(values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != FEATURE_COUNT {
            return Err(Error::InvalidInput(format!(
                "feature vector has {} values, registry defines {FEATURE_COUNT}",
                values.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        Ok(Self { values })
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.values[index]
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All 437 features missing; abstain-only input.
    pub fn all_missing() -> Self {
        Self {
            values: vec![None; FEATURE_COUNT],
        }
    }
}

// ---------------------------------------------------------------------------
// Frequency content
// ---------------------------------------------------------------------------

/// Median periodogram power over the nine bands, then the 5-14 / 5-50 Hz
/// power ratio.
///
/// The periodogram is a single full-length DFT, `|X_k|^2 / n`, one-sided.
/// Bands are clipped at Nyquist; a band entirely above Nyquist is missing.
/// Inputs shorter than one second yield all-missing.
pub fn band_power_features(samples: &[f64], fs: f64) -> [Option<f64>; 10] {
    let mut out = [None; 10];
    let n = samples.len();
    if (n as f64) < fs || samples.iter().any(|v| !v.is_finite()) {
        return out;
    }

    let mut buffer: Vec<Complex<f64>> =
        samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buffer);

    let nyquist = fs / 2.0;
    let half = n / 2;
    let power: Vec<f64> = buffer[..=half]
        .iter()
        .map(|c| c.norm_sqr() / n as f64)
        .collect();
    let freq = |k: usize| k as f64 * fs / n as f64;

    for (b, &(lo, hi)) in BAND_EDGES_HZ.iter().enumerate() {
        if lo > nyquist {
            continue; // entirely above Nyquist: missing
        }
        let hi_eff = hi.min(nyquist);
        let mut in_band: Vec<f64> = (0..=half)
            .filter(|&k| {
                let f = freq(k);
                f >= lo && f <= hi_eff
            })
            .map(|k| power[k])
            .collect();
        if in_band.is_empty() {
            continue;
        }
        in_band.sort_unstable_by(f64::total_cmp);
        let mid = in_band.len() / 2;
        let median = if in_band.len() % 2 == 0 {
            (in_band[mid - 1] + in_band[mid]) / 2.0
        } else {
            in_band[mid]
        };
        out[b] = Some(median);
    }

    let band_sum = |lo: f64, hi: f64| -> f64 {
        (0..=half)
            .filter(|&k| {
                let f = freq(k);
                f >= lo && f <= hi.min(nyquist)
            })
            .map(|k| power[k])
            .sum()
    };
    let denominator = band_sum(5.0, 50.0);
    if denominator >= 1e-12 {
        out[9] = Some(band_sum(5.0, 14.0) / denominator);
    }
    out
}

// ---------------------------------------------------------------------------
// Beat-to-beat interval
// ---------------------------------------------------------------------------

/// The 11 beat-to-beat features: count, min, max, median, mean, SDNN
/// (population SD), RMSSD, mean heart rate, and the three heart-rate
/// asymmetry indices.
pub fn rr_statistics(rr_ms: &[f64]) -> [Option<f64>; 11] {
    let mut out = [None; 11];
    out[0] = Some(rr_ms.len() as f64);
    if rr_ms.is_empty() {
        return out;
    }

    let min = rr_ms.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = rr_ms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = rr_ms.iter().sum::<f64>() / rr_ms.len() as f64;
    out[1] = Some(min);
    out[2] = Some(max);
    out[3] = Some(median_of(rr_ms));
    out[4] = Some(mean);
    if mean > 0.0 {
        out[7] = Some(60_000.0 / mean);
    }

    if rr_ms.len() >= 2 {
        let variance =
            rr_ms.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / rr_ms.len() as f64;
        out[5] = Some(variance.sqrt());
        let sq_diffs: f64 = rr_ms.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
        out[6] = Some((sq_diffs / (rr_ms.len() - 1) as f64).sqrt());

        if let Some((pi, gi, si)) = hra_indices(rr_ms) {
            out[8] = Some(pi);
            out[9] = Some(gi);
            out[10] = Some(si);
        }
    }
    out
}

/// Heart-rate asymmetry on the Poincare plot `(RR_i, RR_{i+1})`.
///
/// Points with `RR_{i+1} < RR_i` lie below the identity line. PI is the
/// percentage of off-line points below; GI weights points above by their
/// distance to the line; SI weights them by angular deviation from 45
/// degrees. All three are missing when every point sits on the line.
pub fn hra_indices(rr_ms: &[f64]) -> Option<(f64, f64, f64)> {
    if rr_ms.len() < 2 {
        return None;
    }
    let mut below = 0usize;
    let mut off_line = 0usize;
    let mut dist_above = 0.0;
    let mut dist_total = 0.0;
    let mut angle_above = 0.0;
    let mut angle_total = 0.0;

    for w in rr_ms.windows(2) {
        let (x, y) = (w[0], w[1]);
        let delta = y - x;
        if delta == 0.0 {
            continue;
        }
        off_line += 1;
        let distance = delta.abs() / std::f64::consts::SQRT_2;
        let angle = (45.0 - y.atan2(x).to_degrees()).abs();
        dist_total += distance;
        angle_total += angle;
        if delta < 0.0 {
            below += 1;
        } else {
            dist_above += distance;
            angle_above += angle;
        }
    }

    if off_line == 0 {
        return None;
    }
    let pi = 100.0 * (below as f64 / off_line as f64);
    let gi = if dist_total > 0.0 { 100.0 * (dist_above / dist_total) } else { 0.0 };
    let si = if angle_total > 0.0 { 100.0 * (angle_above / angle_total) } else { 0.0 };
    Some((pi, gi, si))
}

// ---------------------------------------------------------------------------
// Reconstructed phase space
// ---------------------------------------------------------------------------

/// Delay embedding of the unit-normalized signal: dimension 2, delay 4.
pub const RPS_DELAY: usize = 4;
/// Phase-space histogram grid dimension.
pub const RPS_GRID: usize = 20;

/// Two-dimensional delay embedding; all coordinates in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct PhaseSpace {
    points: Vec<(f64, f64)>,
}

impl PhaseSpace {
    /// Build directly from points (test fixtures, constructed cases).
    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("phase space needs at least one point".into()));
        }
        if points
            .iter()
            .any(|&(x, y)| !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y))
        {
            return Err(Error::InvalidInput("phase-space point outside [0,1]^2".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// Embed a unit-normalized signal as `(x_i, x_{i+4})` pairs.
pub fn rps_embed(samples: &[f64]) -> Result<PhaseSpace> {
    if samples.len() < RPS_DELAY + 1 {
        return Err(Error::InsufficientSignal(format!(
            "{} samples, need at least {} for delay-4 embedding",
            samples.len(),
            RPS_DELAY + 1
        )));
    }
    let points = (0..samples.len() - RPS_DELAY)
        .map(|i| (samples[i], samples[i + RPS_DELAY]))
        .collect();
    PhaseSpace::from_points(points)
}

/// 20x20 occupancy histogram (row-major, normalized to sum 1) followed by
/// the spatial filling index `sum(p^2) / 400`.
pub fn grid_occupancy_and_sfi(ps: &PhaseSpace) -> Vec<f64> {
    let cells = RPS_GRID * RPS_GRID;
    let mut counts = vec![0usize; cells];
    for &(x, y) in ps.points() {
        let r = ((x * RPS_GRID as f64) as usize).min(RPS_GRID - 1);
        let c = ((y * RPS_GRID as f64) as usize).min(RPS_GRID - 1);
        counts[r * RPS_GRID + c] += 1;
    }
    let total = ps.points().len() as f64;
    let mut out: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
    // Integer-count form of sum(p^2)/cells: exact at the occupancy extremes.
    let sum_sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    let sfi = sum_sq / (total * total * cells as f64);
    out.push(sfi);
    out
}

// ---------------------------------------------------------------------------
// Poincare section
// ---------------------------------------------------------------------------

/// Crossing and excursion statistics of the trajectory against the unity
/// line `x_{n+4} = x_n`.
///
/// `d_i = x_{i+4} - x_i` is the signed distance proxy; a crossing is an
/// adjacent pair with strictly opposite signs, located at the midpoint of
/// the two points' projections onto the line. Sign runs (maximal stretches
/// of same-sign nonzero `d`) yield excursion amplitudes.
pub fn poincare_section_features(ps: &PhaseSpace) -> Result<[Option<f64>; 13]> {
    let points = ps.points();
    if points.len() < 2 {
        return Err(Error::InsufficientSignal(
            "poincare section needs at least two phase-space points".into(),
        ));
    }
    let d: Vec<f64> = points.iter().map(|&(x, y)| y - x).collect();
    let n = points.len();

    let mut crossing_coords: Vec<f64> = Vec::new();
    let mut crossing_indices: Vec<usize> = Vec::new();
    for i in 0..n - 1 {
        if d[i] * d[i + 1] < 0.0 {
            let proj_a = (points[i].0 + points[i].1) / 2.0;
            let proj_b = (points[i + 1].0 + points[i + 1].1) / 2.0;
            crossing_coords.push((proj_a + proj_b) / 2.0);
            crossing_indices.push(i);
        }
    }
    let crossings = crossing_coords.len();

    let mut out: [Option<f64>; 13] = [None; 13];
    out[0] = Some(crossings as f64);
    out[1] = Some(1000.0 * crossings as f64 / n as f64);
    if crossings >= 1 {
        let mean = crossing_coords.iter().sum::<f64>() / crossings as f64;
        out[2] = Some(mean);
        out[3] = Some(population_sd(&crossing_coords, mean));
        out[4] = Some(crossing_coords.iter().cloned().fold(f64::INFINITY, f64::min));
        out[5] = Some(crossing_coords.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
    if crossings >= 2 {
        let gaps: Vec<f64> = crossing_indices
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64)
            .collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        out[6] = Some(mean);
        out[7] = Some(population_sd(&gaps, mean));
    }

    out[8] = Some(d.iter().map(|v| v.abs()).sum::<f64>() / n as f64);
    out[9] = Some(d.iter().map(|v| v.abs()).fold(0.0, f64::max));
    out[10] = Some(d.iter().filter(|&&v| v > 0.0).count() as f64 / n as f64);

    // Excursion amplitudes: max |d| per maximal same-sign run; zeros break
    // runs and belong to none.
    let mut amplitudes: Vec<f64> = Vec::new();
    let mut run_sign = 0i8;
    let mut run_max = 0.0f64;
    for &v in &d {
        let sign = if v > 0.0 {
            1i8
        } else if v < 0.0 {
            -1
        } else {
            0
        };
        if sign == 0 || sign != run_sign {
            if run_sign != 0 {
                amplitudes.push(run_max);
            }
            run_sign = sign;
            run_max = 0.0;
        }
        if sign != 0 {
            run_max = run_max.max(v.abs());
        }
    }
    if run_sign != 0 {
        amplitudes.push(run_max);
    }
    if !amplitudes.is_empty() {
        let mean = amplitudes.iter().sum::<f64>() / amplitudes.len() as f64;
        out[11] = Some(mean);
        out[12] = Some(population_sd(&amplitudes, mean));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

/// Concatenate all five categories in registry order.
///
/// `conditioned` must already be baseline-corrected; `peaks_pt` anchors the
/// template SQI and the RR features, `peaks_fd` is the second bSQI stream.
/// Anything that cannot be computed becomes missing, never an error.
pub fn extract_feature_vector(
    conditioned: &[f64],
    fs: f64,
    peaks_pt: &[usize],
    peaks_fd: &[usize],
) -> FeatureVector {
    let mut values: Vec<Option<f64>> = Vec::with_capacity(FEATURE_COUNT);

    values.push(sqi::template_match_sqi(conditioned, fs, peaks_pt));
    values.push(Some(sqi::bsqi(peaks_pt, peaks_fd, fs)));

    values.extend(band_power_features(conditioned, fs));

    let rr = rr_intervals_ms(peaks_pt, fs);
    values.extend(rr_statistics(&rr));

    let embedding = normalize_unit(conditioned)
        .ok()
        .and_then(|normalized| rps_embed(&normalized).ok());
    match &embedding {
        Some(ps) => values.extend(grid_occupancy_and_sfi(ps).into_iter().map(Some)),
        None => values.extend(std::iter::repeat_n(None, 401)),
    }
    match embedding.as_ref().and_then(|ps| poincare_section_features(ps).ok()) {
        Some(ps_features) => values.extend(ps_features),
        None => values.extend(std::iter::repeat_n(None, 13)),
    }

    debug_assert_eq!(values.len(), FEATURE_COUNT);
    FeatureVector { values }
}

fn median_of(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 0 {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    }
}

fn population_sd(values: &[f64], mean: f64) -> f64 {
    (values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64).sqrt()
}

#[cfg(test)]
mod tests;
