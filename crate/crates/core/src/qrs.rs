//! R-peak detection by two independent detectors, and RR-interval
//! derivation.
//!
//! [`detect_pan_tompkins`] is the classic band-pass / derivative / squaring /
//! integration chain with adaptive dual thresholds. [`detect_filtered_derivative`]
//! is a deliberately different second opinion (percentile-thresholded absolute
//! derivative) so that inter-detector agreement carries signal-quality
//! information. Both detectors are amplitude-scale invariant: every threshold
//! is derived from the data.

use crate::error::Error;
use crate::Result;

/// Which detector produced an annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    PanTompkins,
    FilteredDerivative,
}

/// Detected R-peaks for one record.
///
/// Peaks are strictly increasing, in-range, and separated by at least the
/// 200 ms refractory period.
#[derive(Debug, Clone)]
pub struct QrsAnnotation {
    pub record_id: String,
    pub peaks: Vec<usize>,
    pub detector: Detector,
}

impl QrsAnnotation {
    pub fn new(
        record_id: impl Into<String>,
        peaks: Vec<usize>,
        detector: Detector,
        fs: f64,
        record_len: usize,
    ) -> Result<Self> {
        let refractory = refractory_samples(fs);
        for pair in peaks.windows(2) {
            if pair[1] <= pair[0] || pair[1] - pair[0] < refractory {
                return Err(Error::InvalidInput(format!(
                    "peaks {} and {} violate the {refractory}-sample refractory gap",
                    pair[0], pair[1]
                )));
            }
        }
        if peaks.last().is_some_and(|&p| p >= record_len) {
            return Err(Error::InvalidInput("peak index beyond record end".into()));
        }
        Ok(Self {
            record_id: record_id.into(),
            peaks,
            detector,
        })
    }
}

/// 200 ms expressed in samples.
pub fn refractory_samples(fs: f64) -> usize {
    (0.2 * fs).round() as usize
}

/// Successive peak differences in milliseconds.
pub fn rr_intervals_ms(peaks: &[usize], fs: f64) -> Vec<f64> {
    peaks
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64 * 1000.0 / fs)
        .collect()
}

// ---------------------------------------------------------------------------
// Zero-phase Butterworth filtering
// ---------------------------------------------------------------------------

/// Second-order section, normalized so a0 = 1.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    fn lowpass(fc: f64, fs: f64) -> Self {
        // Butterworth (Q = 1/sqrt(2)): alpha = sin(w0) / (2 Q).
        let w0 = 2.0 * std::f64::consts::PI * fc / fs;
        let alpha = w0.sin() * std::f64::consts::FRAC_1_SQRT_2;
        let cosw = w0.cos();
        let a0 = 1.0 + alpha;
        Self {
            b0: (1.0 - cosw) / 2.0 / a0,
            b1: (1.0 - cosw) / a0,
            b2: (1.0 - cosw) / 2.0 / a0,
            a1: -2.0 * cosw / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    fn highpass(fc: f64, fs: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * fc / fs;
        let alpha = w0.sin() * std::f64::consts::FRAC_1_SQRT_2;
        let cosw = w0.cos();
        let a0 = 1.0 + alpha;
        Self {
            b0: (1.0 + cosw) / 2.0 / a0,
            b1: -(1.0 + cosw) / a0,
            b2: (1.0 + cosw) / 2.0 / a0,
            a1: -2.0 * cosw / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    fn run(&self, x: &[f64]) -> Vec<f64> {
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        x.iter()
            .map(|&xi| {
                let y = self.b0 * xi + s1;
                s1 = self.b1 * xi - self.a1 * y + s2;
                s2 = self.b2 * xi - self.a2 * y;
                y
            })
            .collect()
    }
}

/// Forward-backward filtering with odd-symmetric edge padding: zero phase,
/// so filtered peaks stay aligned with the input.
fn filtfilt(sections: &[Biquad], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let pad = n.saturating_sub(1).min(300);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for k in (1..=pad).rev() {
        ext.push(2.0 * x[0] - x[k]);
    }
    ext.extend_from_slice(x);
    for k in 1..=pad {
        ext.push(2.0 * x[n - 1] - x[n - 1 - k]);
    }

    let mut y = ext;
    for s in sections {
        y = s.run(&y);
    }
    y.reverse();
    for s in sections {
        y = s.run(&y);
    }
    y.reverse();
    y[pad..pad + n].to_vec()
}

fn bandpass(x: &[f64], lo: f64, hi: f64, fs: f64) -> Vec<f64> {
    filtfilt(&[Biquad::highpass(lo, fs), Biquad::lowpass(hi, fs)], x)
}

fn check_detector_input(samples: &[f64], fs: f64) -> Result<()> {
    crate::signal::check_finite(samples)?;
    if fs < 100.0 {
        return Err(Error::InsufficientSignal(format!(
            "sampling rate {fs} Hz below the 100 Hz minimum"
        )));
    }
    if (samples.len() as f64) < 2.0 * fs {
        return Err(Error::InsufficientSignal(format!(
            "{} samples is under 2 s at {fs} Hz",
            samples.len()
        )));
    }
    Ok(())
}

/// Five-point derivative, zero at the edges.
fn five_point_derivative(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    for i in 2..n.saturating_sub(2) {
        out[i] = (-x[i - 2] - 2.0 * x[i - 1] + 2.0 * x[i + 1] + x[i + 2]) / 8.0;
    }
    out
}

/// Indices that strictly dominate their centered window (ties resolve to
/// the leftmost index); zero-valued samples never qualify.
fn windowed_maxima(x: &[f64], half_window: usize) -> Vec<usize> {
    let n = x.len();
    let mut out = Vec::new();
    'outer: for i in 0..n {
        let v = x[i];
        if v <= 0.0 {
            continue;
        }
        let lo = i.saturating_sub(half_window);
        let hi = (i + half_window).min(n - 1);
        for j in lo..i {
            if x[j] >= v {
                continue 'outer;
            }
        }
        for j in i + 1..=hi {
            if x[j] > v {
                continue 'outer;
            }
        }
        out.push(i);
    }
    out
}

/// Centered moving-window mean with shrinking edges.
fn centered_window_mean(x: &[f64], width: usize) -> Vec<f64> {
    let n = x.len();
    let half = width / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in x {
        acc += v;
        prefix.push(acc);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
        })
        .collect()
}

/// Move each detection to the band-passed local maximum within +-50 ms,
/// then enforce strict ordering and the refractory gap (larger band-passed
/// amplitude wins a conflict).
fn refine_peaks(detections: &[usize], bandpassed: &[f64], fs: f64) -> Vec<usize> {
    let n = bandpassed.len();
    let reach = (0.05 * fs).round() as usize;
    let refractory = refractory_samples(fs);

    let mut refined: Vec<usize> = detections
        .iter()
        .map(|&d| {
            let lo = d.saturating_sub(reach);
            let hi = (d + reach).min(n - 1);
            (lo..=hi)
                .max_by(|&a, &b| bandpassed[a].total_cmp(&bandpassed[b]))
                .unwrap_or(d)
        })
        .collect();
    refined.sort_unstable();
    refined.dedup();

    let mut out: Vec<usize> = Vec::with_capacity(refined.len());
    for p in refined {
        match out.last() {
            Some(&prev) if p - prev < refractory => {
                if bandpassed[p] > bandpassed[prev] {
                    *out.last_mut().unwrap() = p;
                }
            }
            _ => out.push(p),
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Pan-Tompkins
// ---------------------------------------------------------------------------

/// Pan-Tompkins QRS detection.
///
/// Band-pass 5-15 Hz, five-point derivative, squaring, 150 ms moving-window
/// integration, adaptive signal/noise thresholds with a 200 ms refractory
/// period and search-back, then refinement to band-passed local maxima.
pub fn detect_pan_tompkins(samples: &[f64], fs: f64) -> Result<Vec<usize>> {
    check_detector_input(samples, fs)?;
    let bp = bandpass(samples, 5.0, 15.0, fs);
    let deriv = five_point_derivative(&bp);
    let squared: Vec<f64> = deriv.iter().map(|&v| v * v).collect();
    let mwi = centered_window_mean(&squared, (0.150 * fs).round() as usize);

    let n = mwi.len();
    let refractory = refractory_samples(fs);

    // Candidate peaks: maxima over a centered refractory-sized window, so
    // ripple on one integration hump yields a single candidate at its crest.
    let candidates = windowed_maxima(&mwi, refractory / 2);

    // Threshold state seeded from the first two seconds.
    let init = (2.0 * fs) as usize;
    let mut spki = mwi[..init.min(n)].iter().cloned().fold(0.0, f64::max);
    let mut npki = mwi[..init.min(n)].iter().sum::<f64>() / init.min(n) as f64;

    let mut accepted: Vec<usize> = Vec::new();
    let mut rejected: Vec<usize> = Vec::new();
    let mut recent_rr: Vec<usize> = Vec::new();

    let push_rr = |recent: &mut Vec<usize>, rr: usize| {
        recent.push(rr);
        if recent.len() > 8 {
            recent.remove(0);
        }
    };

    for &i in &candidates {
        let threshold = npki + 0.25 * (spki - npki);

        // Search-back: a long silence re-examines rejected candidates
        // against half the threshold.
        if let Some(&last) = accepted.last() {
            if !recent_rr.is_empty() {
                let rr_avg = recent_rr.iter().sum::<usize>() as f64 / recent_rr.len() as f64;
                if (i - last) as f64 > 1.66 * rr_avg {
                    let best = rejected
                        .iter()
                        .cloned()
                        .filter(|&j| j > last + refractory && j < i && mwi[j] > 0.5 * threshold)
                        .max_by(|&a, &b| mwi[a].total_cmp(&mwi[b]));
                    if let Some(j) = best {
                        spki = 0.25 * mwi[j] + 0.75 * spki;
                        push_rr(&mut recent_rr, j - last);
                        accepted.push(j);
                        rejected.retain(|&r| r > j);
                    }
                }
            }
        }

        let since_last_ok = accepted.last().is_none_or(|&last| i - last >= refractory);
        if since_last_ok && mwi[i] > threshold {
            if let Some(&last) = accepted.last() {
                push_rr(&mut recent_rr, i - last);
            }
            accepted.push(i);
            spki = 0.125 * mwi[i] + 0.875 * spki;
        } else {
            npki = 0.125 * mwi[i] + 0.875 * npki;
            rejected.push(i);
        }
    }

    Ok(refine_peaks(&accepted, &bp, fs))
}

// ---------------------------------------------------------------------------
// Filtered-derivative detector
// ---------------------------------------------------------------------------

/// Fraction of the rolling 95th percentile used as detection threshold.
const FD_THRESHOLD_FRACTION: f64 = 0.4;
/// Minimum p95/p50 crest ratio of the band-passed signal for a window to be
/// considered structured; band-limited Gaussian noise sits near 2.9.
const FD_PEAKINESS_MIN: f64 = 4.0;

/// Second-opinion detector: band-pass 8-20 Hz, absolute derivative,
/// threshold at 0.4 x rolling 2 s 95th percentile, 200 ms refractory, and
/// the same band-passed peak refinement as Pan-Tompkins.
///
/// Windows whose band-passed crest ratio (p95/p50) is below 4 are treated
/// as unstructured and produce no detections; without this gate a pure
/// percentile threshold fires steadily on noise.
pub fn detect_filtered_derivative(samples: &[f64], fs: f64) -> Result<Vec<usize>> {
    check_detector_input(samples, fs)?;
    let bp = bandpass(samples, 8.0, 20.0, fs);
    let n = bp.len();
    let mut abs_deriv = vec![0.0; n];
    for i in 1..n {
        abs_deriv[i] = (bp[i] - bp[i - 1]).abs();
    }
    let abs_bp: Vec<f64> = bp.iter().map(|v| v.abs()).collect();

    // Piecewise-constant rolling statistics on a 0.1 s grid over centered
    // 2 s windows.
    let step = ((0.1 * fs).round() as usize).max(1);
    let half_window = fs.round() as usize;
    let cells = n.div_ceil(step);
    let mut threshold = vec![f64::INFINITY; cells];
    let mut structured = vec![false; cells];
    let mut scratch: Vec<f64> = Vec::new();

    let percentile = |sorted: &[f64], q: f64| -> f64 {
        let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
        sorted[idx]
    };

    for cell in 0..cells {
        let center = cell * step + step / 2;
        let lo = center.saturating_sub(half_window);
        let hi = (center + half_window).min(n - 1);

        scratch.clear();
        scratch.extend_from_slice(&abs_deriv[lo..=hi]);
        scratch.sort_unstable_by(f64::total_cmp);
        threshold[cell] = FD_THRESHOLD_FRACTION * percentile(&scratch, 0.95);

        scratch.clear();
        scratch.extend_from_slice(&abs_bp[lo..=hi]);
        scratch.sort_unstable_by(f64::total_cmp);
        let p95 = percentile(&scratch, 0.95);
        let p50 = percentile(&scratch, 0.50);
        structured[cell] = p50 > 0.0 && p95 / p50 >= FD_PEAKINESS_MIN;
    }

    let refractory = refractory_samples(fs);
    let mut detections: Vec<usize> = Vec::new();
    for i in windowed_maxima(&abs_deriv, refractory / 2) {
        let cell = i / step;
        if structured[cell]
            && abs_deriv[i] > threshold[cell]
            && detections.last().is_none_or(|&last| i - last >= refractory)
        {
            detections.push(i);
        }
    }

    Ok(refine_peaks(&detections, &bp, fs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::synth::{synth_ecg, SynthConfig};

    fn pulse_train(bpm: f64, seconds: f64, noise_sd: f64, seed: u64) -> (Vec<f64>, Vec<usize>) {
        let out = synth_ecg(&SynthConfig {
            bpm,
            duration_s: seconds,
            fs: 300.0,
            noise_sd,
            seed,
            ..Default::default()
        })
        .unwrap();
        (out.record.samples, out.true_peaks)
    }

    fn match_within(detected: &[usize], truth: &[usize], tol: usize) -> usize {
        let mut used = vec![false; truth.len()];
        let mut matched = 0;
        for &d in detected {
            let best = truth
                .iter()
                .enumerate()
                .filter(|&(k, &t)| !used[k] && t.abs_diff(d) <= tol)
                .min_by_key(|&(_, &t)| t.abs_diff(d));
            if let Some((k, _)) = best {
                used[k] = true;
                matched += 1;
            }
        }
        matched
    }

    #[test]
    fn pan_tompkins_finds_clean_75_bpm_train() {
        let (samples, truth) = pulse_train(75.0, 10.0, 0.0, 0);
        let peaks = detect_pan_tompkins(&samples, 300.0).unwrap();
        assert!(
            peaks.len() == 12 || peaks.len() == 13,
            "expected 12-13 peaks, got {}",
            peaks.len()
        );
        let matched = match_within(&peaks, &truth, 3);
        assert_eq!(matched, peaks.len(), "every detection within +-3 samples");
    }

    #[test]
    fn pan_tompkins_on_zero_signal_is_empty() {
        let samples = vec![0.0; 3000];
        assert!(detect_pan_tompkins(&samples, 300.0).unwrap().is_empty());
    }

    #[test]
    fn pan_tompkins_tolerates_noise() {
        let (clean, truth) = pulse_train(75.0, 10.0, 0.0, 0);
        let clean_peaks = detect_pan_tompkins(&clean, 300.0).unwrap();
        let (noisy, _) = pulse_train(75.0, 10.0, 0.05, 7);
        let peaks = detect_pan_tompkins(&noisy, 300.0).unwrap();
        assert!(
            peaks.len().abs_diff(clean_peaks.len()) <= 1,
            "{} vs {}",
            peaks.len(),
            clean_peaks.len()
        );
        let matched = match_within(&peaks, &truth, 5);
        assert!(matched >= peaks.len() - 1, "{matched} of {}", peaks.len());
    }

    #[test]
    fn detectors_agree_on_clean_train() {
        let (samples, _) = pulse_train(75.0, 10.0, 0.0, 0);
        let pt = detect_pan_tompkins(&samples, 300.0).unwrap();
        let fd = detect_filtered_derivative(&samples, 300.0).unwrap();
        assert_eq!(pt.len(), fd.len(), "pt {:?} fd {:?}", pt, fd);
        let tol = (0.150 * 300.0) as usize;
        assert_eq!(match_within(&fd, &pt, tol), pt.len());
    }

    #[test]
    fn filtered_derivative_on_zero_signal_is_empty() {
        let samples = vec![0.0; 3000];
        assert!(detect_filtered_derivative(&samples, 300.0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn filtered_derivative_stays_quiet_on_noise() {
        let out = synth_ecg(&SynthConfig {
            bpm: 75.0,
            duration_s: 10.0,
            fs: 300.0,
            noise_sd: 0.05,
            seed: 11,
            ..Default::default()
        })
        .unwrap();
        // Noise only: strip the pulse train by regenerating noise alone.
        let clean = synth_ecg(&SynthConfig {
            bpm: 75.0,
            duration_s: 10.0,
            fs: 300.0,
            noise_sd: 0.0,
            seed: 11,
            ..Default::default()
        })
        .unwrap();
        let noise: Vec<f64> = out
            .record
            .samples
            .iter()
            .zip(&clean.record.samples)
            .map(|(a, b)| a - b)
            .collect();
        let peaks = detect_filtered_derivative(&noise, 300.0).unwrap();
        assert!(peaks.len() < 5, "got {} detections on noise", peaks.len());
    }

    #[test]
    fn detectors_are_amplitude_scale_invariant() {
        let (samples, _) = pulse_train(90.0, 10.0, 0.03, 3);
        for scale in [0.05, 1.0, 250.0] {
            let scaled: Vec<f64> = samples.iter().map(|v| v * scale).collect();
            assert_eq!(
                detect_pan_tompkins(&samples, 300.0).unwrap(),
                detect_pan_tompkins(&scaled, 300.0).unwrap(),
                "pan-tompkins at scale {scale}"
            );
            assert_eq!(
                detect_filtered_derivative(&samples, 300.0).unwrap(),
                detect_filtered_derivative(&scaled, 300.0).unwrap(),
                "filtered-derivative at scale {scale}"
            );
        }
    }

    #[test]
    fn refractory_and_ordering_hold() {
        let (samples, _) = pulse_train(180.0, 10.0, 0.05, 5);
        for peaks in [
            detect_pan_tompkins(&samples, 300.0).unwrap(),
            detect_filtered_derivative(&samples, 300.0).unwrap(),
        ] {
            for w in peaks.windows(2) {
                assert!(w[1] > w[0]);
                assert!(w[1] - w[0] >= refractory_samples(300.0));
            }
        }
    }

    #[test]
    fn short_input_is_rejected() {
        let samples = vec![0.0; 100];
        assert!(matches!(
            detect_pan_tompkins(&samples, 300.0),
            Err(Error::InsufficientSignal(_))
        ));
    }

    #[test]
    fn rr_intervals_basic() {
        assert_eq!(rr_intervals_ms(&[0, 300, 600], 300.0), vec![1000.0, 1000.0]);
        assert_eq!(rr_intervals_ms(&[42], 300.0), Vec::<f64>::new());
        assert_eq!(rr_intervals_ms(&[0, 240, 540], 300.0), vec![800.0, 1000.0]);
    }

    #[test]
    fn annotation_validates_refractory() {
        assert!(QrsAnnotation::new("r", vec![0, 10], Detector::PanTompkins, 300.0, 100).is_err());
        assert!(QrsAnnotation::new("r", vec![0, 70], Detector::PanTompkins, 300.0, 100).is_ok());
        assert!(QrsAnnotation::new("r", vec![0, 70], Detector::PanTompkins, 300.0, 50).is_err());
    }
}
