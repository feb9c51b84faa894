//! Time-frequency transform and QRS-aligned fixed-size segment extraction.
//!
//! Frames of 75 samples hop by 12, are Hamming-windowed, and zero-padded to
//! a 128-point FFT; the first 20 magnitude bins (about 47 Hz at 300 Hz
//! sampling) are kept and log-compressed. A 15 s record at 300 Hz therefore
//! spans at least 375 frames and a 9 s record at least 225, matching the two
//! model input widths.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::Error;
use crate::Result;

/// Analysis window length in samples.
pub const WINDOW: usize = 75;
/// Hop between consecutive frames in samples.
pub const HOP: usize = 12;
/// FFT length after zero-padding.
pub const FFT_LEN: usize = 128;
/// Number of low-frequency bins kept.
pub const BINS: usize = 20;
/// Frames in a main-model segment (15 s at 300 Hz).
pub const MAIN_WIDTH: usize = 375;
/// Frames in a secondary-model segment (9 s at 300 Hz).
pub const SECONDARY_WIDTH: usize = 225;

/// Log-compressed magnitude spectrogram, `BINS` rows by `frames` columns.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    /// Row-major `[bin][frame]`, each entry `ln(1 + |X|)`.
    pub magnitudes: Vec<f64>,
    pub frames: usize,
    /// Hz per frequency bin (`fs / FFT_LEN`).
    pub bin_hz: f64,
    pub hop_samples: usize,
    pub fs: f64,
}

impl Spectrogram {
    pub fn value(&self, bin: usize, frame: usize) -> f64 {
        self.magnitudes[bin * self.frames + frame]
    }

    /// Invert the log compression for one entry.
    pub fn linear_magnitude(&self, bin: usize, frame: usize) -> f64 {
        self.value(bin, frame).exp_m1()
    }
}

/// One fixed-size model input window anchored at a QRS peak.
#[derive(Debug, Clone)]
pub struct SpectroSegment {
    /// Row-major `BINS x width`.
    pub matrix: Vec<f64>,
    pub width: usize,
    pub anchor_peak: usize,
}

/// Short-time Fourier magnitude of `samples`.
///
/// The tail is zero-padded by one window so records of exactly 15 s / 9 s
/// still yield a full segment; frame count is `floor(n / HOP) + 1`.
pub fn stft_magnitude(samples: &[f64], fs: f64) -> Result<Spectrogram> {
    crate::signal::check_finite(samples)?;
    if samples.len() < WINDOW {
        return Err(Error::InsufficientSignal(format!(
            "{} samples, need at least {WINDOW} for one frame",
            samples.len()
        )));
    }
    let n = samples.len();
    let frames = n / HOP + 1;

    let hamming: Vec<f64> = (0..WINDOW)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (WINDOW - 1) as f64).cos())
        .collect();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(FFT_LEN);
    let mut buffer = vec![Complex::new(0.0, 0.0); FFT_LEN];

    let mut magnitudes = vec![0.0; BINS * frames];
    for frame in 0..frames {
        let start = frame * HOP;
        for (i, slot) in buffer.iter_mut().enumerate() {
            let idx = start + i;
            let x = if i < WINDOW && idx < n { samples[idx] * hamming[i] } else { 0.0 };
            *slot = Complex::new(x, 0.0);
        }
        fft.process(&mut buffer);
        for bin in 0..BINS {
            magnitudes[bin * frames + frame] = buffer[bin].norm().ln_1p();
        }
    }

    Ok(Spectrogram {
        magnitudes,
        frames,
        bin_hz: fs / FFT_LEN as f64,
        hop_samples: HOP,
        fs,
    })
}

/// Cut one `BINS x width` block per peak, starting at the frame containing
/// the peak. Peaks whose block would run past the end are skipped; an empty
/// result is valid.
pub fn extract_segments(
    spec: &Spectrogram,
    peaks: &[usize],
    width: usize,
) -> Result<Vec<SpectroSegment>> {
    if width == 0 {
        return Err(Error::InvalidInput("segment width must be positive".into()));
    }
    let mut out = Vec::new();
    for &peak in peaks {
        let start = peak / spec.hop_samples;
        if start + width > spec.frames {
            continue;
        }
        let mut matrix = Vec::with_capacity(BINS * width);
        for bin in 0..BINS {
            let row = bin * spec.frames + start;
            matrix.extend_from_slice(&spec.magnitudes[row..row + width]);
        }
        out.push(SpectroSegment {
            matrix,
            width,
            anchor_peak: peak,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fifteen_seconds_spans_a_main_segment() {
        let samples = vec![0.1; 4500];
        let spec = stft_magnitude(&samples, 300.0).unwrap();
        assert_eq!(spec.frames, 4500 / HOP + 1);
        assert!(spec.frames >= MAIN_WIDTH);
        let segments = extract_segments(&spec, &[0], MAIN_WIDTH).unwrap();
        assert_eq!(segments.len(), 1);
        assert_eq!(segments[0].matrix.len(), BINS * MAIN_WIDTH);
    }

    #[test]
    fn zero_signal_gives_zero_magnitudes() {
        let spec = stft_magnitude(&vec![0.0; 900], 300.0).unwrap();
        assert!(spec.magnitudes.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn bin_centered_sinusoid_peaks_at_its_bin() {
        let fs = 300.0;
        let f = 10.0 * fs / FFT_LEN as f64;
        let samples: Vec<f64> = (0..3000)
            .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / fs).sin())
            .collect();
        let spec = stft_magnitude(&samples, fs).unwrap();
        // Skip tail frames that cover the zero padding.
        let full_frames = (3000 - WINDOW) / HOP + 1;
        let mean_mag: Vec<f64> = (0..BINS)
            .map(|b| (0..full_frames).map(|t| spec.value(b, t)).sum::<f64>() / full_frames as f64)
            .collect();
        let argmax = mean_mag
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 10);
    }

    #[test]
    fn segments_follow_bounds_arithmetic() {
        // 60 s record: peaks in the first 40 s all fit a 375-frame block.
        let samples = vec![0.5; 18_000];
        let spec = stft_magnitude(&samples, 300.0).unwrap();
        let peaks: Vec<usize> = (0..40).map(|s| s * 300).collect();
        let segments = extract_segments(&spec, &peaks, MAIN_WIDTH).unwrap();
        assert_eq!(segments.len(), peaks.len());
        for s in &segments {
            assert_eq!(s.matrix.len(), BINS * MAIN_WIDTH);
        }

        // A peak in the final 10 s cannot fit 15 s of frames and is skipped.
        let late = extract_segments(&spec, &[17_000], MAIN_WIDTH).unwrap();
        assert!(late.is_empty());
    }

    #[test]
    fn nine_second_record_yields_one_secondary_segment() {
        let samples = vec![0.5; 2700];
        let spec = stft_magnitude(&samples, 300.0).unwrap();
        assert!(spec.frames >= SECONDARY_WIDTH);
        let segments = extract_segments(&spec, &[0], SECONDARY_WIDTH).unwrap();
        assert_eq!(segments.len(), 1);
        assert_eq!(segments[0].matrix.len(), BINS * SECONDARY_WIDTH);
        assert_eq!(segments[0].width, SECONDARY_WIDTH);
    }

    #[test]
    fn pre_log_magnitude_scales_linearly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base: Vec<f64> = (0..1200).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let doubled: Vec<f64> = base.iter().map(|&v| 2.0 * v).collect();
        let a = stft_magnitude(&base, 300.0).unwrap();
        let b = stft_magnitude(&doubled, 300.0).unwrap();
        for (x, y) in a.magnitudes.iter().zip(&b.magnitudes) {
            let (lin_a, lin_b) = (x.exp_m1(), y.exp_m1());
            assert!((lin_b - 2.0 * lin_a).abs() < 1e-9 * (1.0 + lin_a.abs()));
        }
    }

    #[test]
    fn energy_monotone_in_noise_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let shape: Vec<f64> = (0..1500).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let energy = |scale: f64| -> f64 {
            let scaled: Vec<f64> = shape.iter().map(|&v| v * scale).collect();
            let spec = stft_magnitude(&scaled, 300.0).unwrap();
            spec.magnitudes.iter().map(|m| { let l = m.exp_m1(); l * l }).sum()
        };
        let energies: Vec<f64> = [0.5, 1.0, 2.0, 4.0].iter().map(|&s| energy(s)).collect();
        for pair in energies.windows(2) {
            assert!(pair[1] > pair[0]);
        }
    }

    #[test]
    fn too_short_input_is_rejected() {
        assert!(stft_magnitude(&vec![0.0; 74], 300.0).is_err());
    }
}
