//! Waveform conditioning: baseline wander removal, resampling, amplitude
//! normalization.
//!
//! All functions here are pure and thread-safe.

use crate::error::Error;
use crate::Result;

/// Width in samples of the baseline estimation window: the odd integer
/// nearest to `0.6 * fs` (ties round up).
pub fn baseline_window(fs: f64) -> usize {
    let w = (0.6 * fs).round().max(1.0) as usize;
    if w % 2 == 0 {
        w + 1
    } else {
        w
    }
}

/// Remove baseline wander by subtracting a centered moving average.
///
/// The window is `baseline_window(fs)` samples wide and shrinks at the
/// edges, so the output has the same length as the input and no phase shift.
pub fn remove_baseline(samples: &[f64], fs: f64) -> Result<Vec<f64>> {
    check_finite(samples)?;
    if fs <= 0.0 {
        return Err(Error::InvalidSignal("sampling rate must be positive".into()));
    }
    let n = samples.len();
    let half = (baseline_window(fs) - 1) / 2;

    // Prefix sums keep the shrinking-window average O(n).
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &x in samples {
        acc += x;
        prefix.push(acc);
    }

    let out = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let mean = (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64;
            samples[i] - mean
        })
        .collect();
    Ok(out)
}

/// Linearly interpolate `samples` from rate `fs_in` onto the uniform grid at
/// `fs_out` spanning the same time interval.
///
/// Output length is `floor((n - 1) * fs_out / fs_in) + 1`.
pub fn resample_linear(samples: &[f64], fs_in: f64, fs_out: f64) -> Result<Vec<f64>> {
    check_finite(samples)?;
    if fs_in <= 0.0 || fs_out <= 0.0 {
        return Err(Error::InvalidSignal("sampling rates must be positive".into()));
    }
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooShortToResample);
    }
    let m = ((n - 1) as f64 * fs_out / fs_in).floor() as usize + 1;
    let out = (0..m)
        .map(|j| {
            let pos = (j as f64 * fs_in) / fs_out;
            let i0 = pos.floor() as usize;
            if i0 >= n - 1 {
                samples[n - 1]
            } else {
                let frac = pos - i0 as f64;
                samples[i0] * (1.0 - frac) + samples[i0 + 1] * frac
            }
        })
        .collect();
    Ok(out)
}

/// Affine map onto `[0, 1]`: `(x - min) / (max - min)`.
///
/// A constant signal maps to 0.5 everywhere so that downstream phase-space
/// embedding occupies a single grid cell instead of failing.
pub fn normalize_unit(samples: &[f64]) -> Result<Vec<f64>> {
    check_finite(samples)?;
    let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(vec![0.5; samples.len()]);
    }
    let range = max - min;
    Ok(samples.iter().map(|&x| (x - min) / range).collect())
}

pub(crate) fn check_finite(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidSignal("empty input".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidSignal("non-finite sample".into()));
    }
    Ok(())
}
