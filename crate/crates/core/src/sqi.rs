//! Signal-quality indices: average template-matching correlation and bSQI
//! inter-detector agreement.

use crate::qrs::rr_intervals_ms;

/// Both quality measures for one record. `template_sqi` is missing when
/// fewer than two complete beats fit the record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqiResult {
    pub template_sqi: Option<f64>,
    pub bsqi: f64,
}

/// Mean Pearson correlation between each QRS-aligned beat window and the
/// average beat template.
///
/// The beat window spans 0.25 median RR before the peak to 0.45 after,
/// realized as a fixed window of `round(0.7 * median RR)` samples so every
/// beat correlates against the same support. Beats whose window does not fit
/// inside the record are dropped; a zero-variance beat (or template)
/// contributes correlation 0. Returns `None` with fewer than two complete
/// beats.
pub fn template_match_sqi(samples: &[f64], fs: f64, peaks: &[usize]) -> Option<f64> {
    if peaks.len() < 2 {
        return None;
    }
    let rr_ms = rr_intervals_ms(peaks, fs);
    let median_rr_samples = median(&rr_ms)? * fs / 1000.0;
    let pre = (0.25 * median_rr_samples).round() as usize;
    let len = (0.7 * median_rr_samples).round() as usize;
    if len < 2 {
        return None;
    }

    let n = samples.len();
    let windows: Vec<&[f64]> = peaks
        .iter()
        .filter_map(|&p| {
            let start = p.checked_sub(pre)?;
            let end = start + len;
            (end <= n).then(|| &samples[start..end])
        })
        .collect();
    if windows.len() < 2 {
        return None;
    }

    let mut template = vec![0.0; len];
    for w in &windows {
        for (t, &v) in template.iter_mut().zip(*w) {
            *t += v;
        }
    }
    for t in &mut template {
        *t /= windows.len() as f64;
    }

    let mean_corr = windows
        .iter()
        .map(|w| pearson(w, &template))
        .sum::<f64>()
        / windows.len() as f64;
    Some(mean_corr)
}

/// Agreement between two detectors' peak lists: greedy one-to-one matching
/// within 150 ms, scored as `matched / (|A| + |B| - matched)`.
///
/// Two empty lists agree perfectly (1.0).
pub fn bsqi(peaks_a: &[usize], peaks_b: &[usize], fs: f64) -> f64 {
    if peaks_a.is_empty() && peaks_b.is_empty() {
        return 1.0;
    }
    let tolerance = (0.150 * fs).round() as usize;
    let mut matched = 0usize;
    let mut i = 0;
    let mut j = 0;
    while i < peaks_a.len() && j < peaks_b.len() {
        let a = peaks_a[i];
        let b = peaks_b[j];
        if a.abs_diff(b) <= tolerance {
            matched += 1;
            i += 1;
            j += 1;
        } else if a < b {
            i += 1;
        } else {
            j += 1;
        }
    }
    matched as f64 / (peaks_a.len() + peaks_b.len() - matched) as f64
}

fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 0 {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    })
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a <= 0.0 || var_b <= 0.0 {
        return 0.0;
    }
    cov / (var_a * var_b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// One synthetic beat shape repeated at a fixed period.
    fn repeated_beats(shape: &[f64], period: usize, beats: usize) -> (Vec<f64>, Vec<usize>) {
        let mut samples = vec![0.0; period * (beats + 1)];
        let mut peaks = Vec::new();
        for b in 0..beats {
            let p = period / 2 + b * period;
            peaks.push(p);
            for (k, &v) in shape.iter().enumerate() {
                samples[p - shape.len() / 2 + k] += v;
            }
        }
        (samples, peaks)
    }

    fn beat_shape() -> Vec<f64> {
        (0..40)
            .map(|i| {
                let d = i as f64 - 20.0;
                (-d * d / 30.0).exp() - 0.3 * (-(d - 8.0) * (d - 8.0) / 60.0).exp()
            })
            .collect()
    }

    #[test]
    fn identical_beats_score_one() {
        let (samples, peaks) = repeated_beats(&beat_shape(), 240, 10);
        let sqi = template_match_sqi(&samples, 300.0, &peaks).unwrap();
        assert!((sqi - 1.0).abs() < 1e-9, "sqi {sqi}");
    }

    #[test]
    fn alternating_inverted_beats_cancel() {
        let shape = beat_shape();
        let period = 240;
        let beats = 10;
        let mut samples = vec![0.0; period * (beats + 1)];
        let mut peaks = Vec::new();
        for b in 0..beats {
            let p = period / 2 + b * period;
            peaks.push(p);
            let sign = if b % 2 == 0 { 1.0 } else { -1.0 };
            for (k, &v) in shape.iter().enumerate() {
                samples[p - shape.len() / 2 + k] += sign * v;
            }
        }
        let sqi = template_match_sqi(&samples, 300.0, &peaks).unwrap();
        assert!(sqi.abs() < 0.1, "sqi {sqi}");
    }

    #[test]
    fn white_noise_scores_below_gate() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let samples: Vec<f64> = (0..18000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let peaks: Vec<usize> = (1..60).map(|b| b * 300).collect();
        let sqi = template_match_sqi(&samples, 300.0, &peaks).unwrap();
        assert!(sqi < 0.5, "sqi {sqi}");
    }

    #[test]
    fn fewer_than_two_beats_is_missing() {
        assert_eq!(template_match_sqi(&[0.0; 3000], 300.0, &[1500]), None);
        // Two peaks but only one complete window.
        let (samples, peaks) = repeated_beats(&beat_shape(), 240, 10);
        let truncated = &samples[..peaks[1] + 10];
        assert_eq!(
            template_match_sqi(truncated, 300.0, &peaks[..2]),
            None
        );
    }

    #[test]
    fn sqi_invariant_under_positive_affine_transform() {
        let (samples, peaks) = repeated_beats(&beat_shape(), 240, 10);
        let noisy: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            samples.iter().map(|&v| v + 0.05 * rng.gen_range(-1.0..1.0)).collect()
        };
        let transformed: Vec<f64> = noisy.iter().map(|&v| 3.5 * v + 2.0).collect();
        let a = template_match_sqi(&noisy, 300.0, &peaks).unwrap();
        let b = template_match_sqi(&transformed, 300.0, &peaks).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn bsqi_basic_cases() {
        let a: Vec<usize> = (0..10).map(|i| 100 + i * 300).collect();
        assert_eq!(bsqi(&a, &a, 300.0), 1.0);

        let b: Vec<usize> = (0..5).map(|i| 10_000 + i * 300).collect();
        let c: Vec<usize> = (0..5).map(|i| 100 + i * 300).collect();
        assert_eq!(bsqi(&c, &b, 300.0), 0.0);

        // Same 10 shifted by 30 ms (9 samples) plus 2 distant extras.
        let mut shifted: Vec<usize> = a.iter().map(|&p| p + 9).collect();
        shifted.push(5000);
        shifted.push(6000);
        let v = bsqi(&a, &shifted, 300.0);
        assert!((v - 10.0 / 12.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn bsqi_empty_conventions() {
        assert_eq!(bsqi(&[], &[], 300.0), 1.0);
        assert_eq!(bsqi(&[100], &[], 300.0), 0.0);
    }

    proptest! {
        #[test]
        fn bsqi_symmetric_and_bounded(
            a in proptest::collection::vec(0usize..18_000, 0..40),
            b in proptest::collection::vec(0usize..18_000, 0..40),
        ) {
            let mut a = a; a.sort_unstable(); a.dedup();
            let mut b = b; b.sort_unstable(); b.dedup();
            let ab = bsqi(&a, &b, 300.0);
            let ba = bsqi(&b, &a, 300.0);
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
            if !a.is_empty() {
                prop_assert_eq!(bsqi(&a, &a, 300.0), 1.0);
            }
        }
    }
}
