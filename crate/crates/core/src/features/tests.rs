use super::*;
use proptest::prelude::*;

// -----------------------------------------------------------------------
// Frequency content
// -----------------------------------------------------------------------

/// Independent periodogram: naive DFT, |X_k|^2 / n, one-sided.
fn periodogram_naive(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    (0..=n / 2)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (i, &x) in samples.iter().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * k as f64 * i as f64 / n as f64;
                re += x * phase.cos();
                im += x * phase.sin();
            }
            (re * re + im * im) / n as f64
        })
        .collect()
}

fn band_median_naive(power: &[f64], n: usize, fs: f64, lo: f64, hi: f64) -> Option<f64> {
    let nyquist = fs / 2.0;
    if lo > nyquist {
        return None;
    }
    let mut vals: Vec<f64> = (0..power.len())
        .filter(|&k| {
            let f = k as f64 * fs / n as f64;
            f >= lo && f <= hi.min(nyquist)
        })
        .map(|k| power[k])
        .collect();
    if vals.is_empty() {
        return None;
    }
    vals.sort_unstable_by(f64::total_cmp);
    let mid = vals.len() / 2;
    Some(if vals.len() % 2 == 0 {
        (vals[mid - 1] + vals[mid]) / 2.0
    } else {
        vals[mid]
    })
}

#[test]
fn band_powers_match_naive_dft_and_peak_at_10_hz() {
    // 3001 samples so 10 Hz is off-bin and leaks into its neighborhood.
    let fs = 300.0;
    let n = 3001;
    let samples: Vec<f64> = (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * 10.0 * i as f64 / fs).sin())
        .collect();
    let features = band_power_features(&samples, fs);

    let power = periodogram_naive(&samples);
    for (b, &(lo, hi)) in BAND_EDGES_HZ.iter().enumerate() {
        let expected = band_median_naive(&power, n, fs, lo, hi).unwrap();
        let got = features[b].unwrap();
        assert!(
            (got - expected).abs() <= 1e-9 * expected.max(1e-12),
            "band {b}: {got} vs {expected}"
        );
    }

    // The winning band median must come from a band containing 10 Hz.
    let argmax = (0..9)
        .max_by(|&a, &b| features[a].unwrap().total_cmp(&features[b].unwrap()))
        .unwrap();
    let (lo, hi) = BAND_EDGES_HZ[argmax];
    assert!(lo <= 10.0 && 10.0 <= hi, "argmax band {argmax} = [{lo},{hi}]");

    // Energy concentrated near 10 Hz puts almost all 5-50 power in 5-14.
    assert!(features[9].unwrap() > 0.9, "ratio {:?}", features[9]);
}

#[test]
fn zero_signal_bands_are_zero_and_ratio_missing() {
    let features = band_power_features(&vec![0.0; 600], 300.0);
    for f in &features[..9] {
        assert_eq!(*f, Some(0.0));
    }
    assert_eq!(features[9], None);
}

#[test]
fn bands_clip_at_nyquist_for_250_hz() {
    let samples: Vec<f64> = (0..500).map(|i| (i as f64 * 0.7).sin()).collect();
    let features = band_power_features(&samples, 250.0);
    // 90-150 Hz is partially above the 125 Hz Nyquist: clipped, still present.
    assert!(features[6].is_some());
    let power = periodogram_naive(&samples);
    let expected = band_median_naive(&power, 500, 250.0, 90.0, 150.0).unwrap();
    assert!((features[6].unwrap() - expected).abs() <= 1e-9 * expected.max(1e-12));
}

#[test]
fn sub_second_input_is_all_missing() {
    let features = band_power_features(&vec![1.0; 100], 300.0);
    assert!(features.iter().all(|f| f.is_none()));
}

// -----------------------------------------------------------------------
// Beat-to-beat
// -----------------------------------------------------------------------

#[test]
fn rr_statistics_hand_computed_case() {
    let out = rr_statistics(&[800.0, 810.0, 790.0]);
    assert_eq!(out[0], Some(3.0));
    assert_eq!(out[1], Some(790.0));
    assert_eq!(out[2], Some(810.0));
    assert_eq!(out[3], Some(800.0));
    assert_eq!(out[4], Some(800.0));
    // SDNN = sqrt((0 + 100 + 100) / 3), RMSSD = sqrt((100 + 900) / 2)... see below.
    assert!((out[5].unwrap() - 8.165).abs() < 1e-3, "sdnn {:?}", out[5]);
    assert!((out[6].unwrap() - 15.811).abs() < 1e-3, "rmssd {:?}", out[6]);
    assert_eq!(out[7], Some(75.0));
}

#[test]
fn constant_rr_has_zero_spread_and_missing_asymmetry() {
    let out = rr_statistics(&[1000.0; 10]);
    assert_eq!(out[5], Some(0.0));
    assert_eq!(out[6], Some(0.0));
    assert_eq!(out[8], None);
    assert_eq!(out[9], None);
    assert_eq!(out[10], None);
}

#[test]
fn single_deceleration_is_one_sided() {
    let out = rr_statistics(&[1000.0, 900.0]);
    assert_eq!(out[8], Some(100.0)); // PI: the only off-line point is below
    assert_eq!(out[9], Some(0.0));
    assert_eq!(out[10], Some(0.0));
}

#[test]
fn empty_rr_keeps_count_only() {
    let out = rr_statistics(&[]);
    assert_eq!(out[0], Some(0.0));
    assert!(out[1..].iter().all(|v| v.is_none()));
}

#[test]
fn hra_symmetric_alternation_is_fifty_fifty() {
    let (pi, gi, si) = hra_indices(&[800.0, 900.0, 800.0, 900.0, 800.0]).unwrap();
    assert!((pi - 50.0).abs() < 1e-12);
    assert!((gi - 50.0).abs() < 1e-9);
    assert!((si - 50.0).abs() < 1e-9);
}

#[test]
fn hra_one_sided_cases() {
    let increasing: Vec<f64> = (0..10).map(|i| 800.0 + 10.0 * i as f64).collect();
    assert_eq!(hra_indices(&increasing).unwrap(), (0.0, 100.0, 100.0));
    let decreasing: Vec<f64> = increasing.iter().rev().cloned().collect();
    assert_eq!(hra_indices(&decreasing).unwrap(), (100.0, 0.0, 0.0));
}

proptest! {
    #[test]
    fn pi_reverses_with_the_sequence(
        rr in proptest::collection::vec(400.0f64..1500.0, 3..40),
    ) {
        let has_zero_delta = rr.windows(2).any(|w| w[1] == w[0]);
        prop_assume!(!has_zero_delta);
        let reversed: Vec<f64> = rr.iter().rev().cloned().collect();
        if let (Some((pi_fwd, _, _)), Some((pi_rev, _, _))) =
            (hra_indices(&rr), hra_indices(&reversed))
        {
            prop_assert!((pi_fwd + pi_rev - 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn hra_indices_are_percentages(
        rr in proptest::collection::vec(400.0f64..1500.0, 2..40),
    ) {
        if let Some((pi, gi, si)) = hra_indices(&rr) {
            for v in [pi, gi, si] {
                prop_assert!((0.0..=100.0).contains(&v));
            }
        }
    }
}

// -----------------------------------------------------------------------
// Phase space
// -----------------------------------------------------------------------

#[test]
fn embedding_counts_and_shapes() {
    let ps = rps_embed(&[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
    assert_eq!(ps.points().len(), 1);
    assert_eq!(ps.points()[0], (0.0, 1.0));

    assert!(rps_embed(&[0.1, 0.2, 0.3, 0.4]).is_err());

    let constant = rps_embed(&[0.5; 30]).unwrap();
    assert!(constant.points().iter().all(|&p| p == (0.5, 0.5)));

    // Normalized ramp: x_{i+4} > x_i everywhere.
    let ramp: Vec<f64> = (0..9).map(|i| i as f64 / 8.0).collect();
    let ps = rps_embed(&ramp).unwrap();
    assert_eq!(ps.points().len(), 5);
    assert!(ps.points().iter().all(|&(x, y)| y > x));
}

#[test]
fn grid_single_cell_and_uniform_extremes() {
    let single = PhaseSpace::from_points(vec![(0.3, 0.3); 17]).unwrap();
    let out = grid_occupancy_and_sfi(&single);
    assert_eq!(out.len(), 401);
    assert_eq!(out.iter().take(400).filter(|&&p| p == 1.0).count(), 1);
    assert_eq!(out[400], 1.0 / 400.0); // SFI = 2.5e-3 exactly

    let mut uniform_points = Vec::new();
    for r in 0..20 {
        for c in 0..20 {
            uniform_points.push(((r as f64 + 0.5) / 20.0, (c as f64 + 0.5) / 20.0));
        }
    }
    let uniform = PhaseSpace::from_points(uniform_points).unwrap();
    let out = grid_occupancy_and_sfi(&uniform);
    for &p in out.iter().take(400) {
        assert_eq!(p, 1.0 / 400.0);
    }
    assert_eq!(out[400], 1.0 / 160_000.0); // SFI = 6.25e-6 exactly
}

#[test]
fn top_edge_is_closed() {
    let ps = PhaseSpace::from_points(vec![(1.0, 1.0)]).unwrap();
    let out = grid_occupancy_and_sfi(&ps);
    assert_eq!(out[19 * 20 + 19], 1.0);
}

proptest! {
    #[test]
    fn occupancy_is_a_probability_vector(
        raw in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..300),
    ) {
        let ps = PhaseSpace::from_points(raw).unwrap();
        let out = grid_occupancy_and_sfi(&ps);
        let total: f64 = out[..400].iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for &p in &out[..400] {
            prop_assert!((0.0..=1.0).contains(&p));
        }
        // SFI between uniform and single-cell extremes.
        prop_assert!(out[400] >= 1.0 / 160_000.0 - 1e-15);
        prop_assert!(out[400] <= 1.0 / 400.0 + 1e-15);
    }
}

// -----------------------------------------------------------------------
// Poincare section
// -----------------------------------------------------------------------

/// Phase space with prescribed signed distances d_i, placed around 0.5.
fn ps_with_distances(d: &[f64]) -> PhaseSpace {
    let points = d
        .iter()
        .map(|&di| (0.5 - di / 2.0, 0.5 + di / 2.0))
        .collect();
    PhaseSpace::from_points(points).unwrap()
}

#[test]
fn constant_signal_has_no_crossings() {
    let ps = ps_with_distances(&[0.0; 12]);
    let out = poincare_section_features(&ps).unwrap();
    assert_eq!(out[0], Some(0.0));
    assert_eq!(out[1], Some(0.0));
    for i in 2..8 {
        assert_eq!(out[i], None, "feature {i}");
    }
    assert_eq!(out[8], Some(0.0));
    assert_eq!(out[9], Some(0.0));
    assert_eq!(out[10], Some(0.0));
    assert_eq!(out[11], None);
    assert_eq!(out[12], None);
}

#[test]
fn alternating_distances_cross_everywhere() {
    let amplitude = 0.2;
    let m: usize = 11;
    let d: Vec<f64> = (0..m)
        .map(|i| if i % 2 == 0 { amplitude } else { -amplitude })
        .collect();
    let ps = ps_with_distances(&d);
    let out = poincare_section_features(&ps).unwrap();
    assert_eq!(out[0], Some((m - 1) as f64));
    assert!((out[8].unwrap() - amplitude).abs() < 1e-12);
    let expected_fraction = m.div_ceil(2) as f64 / m as f64;
    assert!((out[10].unwrap() - expected_fraction).abs() < 1e-12);
    // Every run is a single point of the same amplitude.
    assert!((out[11].unwrap() - amplitude).abs() < 1e-12);
    assert!(out[12].unwrap().abs() < 1e-12);
    // All crossings sit at projection 0.5.
    assert!((out[2].unwrap() - 0.5).abs() < 1e-12);
    assert!(out[3].unwrap().abs() < 1e-12);
}

#[test]
fn monotone_positive_distances_never_cross() {
    let ps = ps_with_distances(&[0.1; 9]);
    let out = poincare_section_features(&ps).unwrap();
    assert_eq!(out[0], Some(0.0));
    assert_eq!(out[10], Some(1.0));
    assert_eq!(out[2], None);
    assert!((out[11].unwrap() - 0.1).abs() < 1e-12);
}

// -----------------------------------------------------------------------
// Assembly
// -----------------------------------------------------------------------

fn synthetic_record() -> (Vec<f64>, f64, Vec<usize>, Vec<usize>) {
    let out = crate::io::synth::synth_ecg(&crate::io::synth::SynthConfig {
        bpm: 75.0,
        duration_s: 20.0,
        fs: 300.0,
        noise_sd: 0.02,
        seed: 4,
        ..Default::default()
    })
    .unwrap();
    let conditioned = crate::signal::remove_baseline(&out.record.samples, 300.0).unwrap();
    let pt = crate::qrs::detect_pan_tompkins(&conditioned, 300.0).unwrap();
    let fd = crate::qrs::detect_filtered_derivative(&conditioned, 300.0).unwrap();
    (conditioned, 300.0, pt, fd)
}

#[test]
fn vector_has_exactly_437_features() {
    let (conditioned, fs, pt, fd) = synthetic_record();
    let vector = extract_feature_vector(&conditioned, fs, &pt, &fd);
    assert_eq!(vector.len(), FEATURE_COUNT);
    // Everything is present except possibly the asymmetry indices, which a
    // metronome-regular rhythm (all delta-RR zero) legitimately lacks.
    let hra = CATEGORY_OFFSETS[2] + 8..CATEGORY_OFFSETS[2] + 11;
    for (i, v) in vector.values().iter().enumerate() {
        if !hra.contains(&i) {
            assert!(v.is_some(), "feature {i} unexpectedly missing");
        }
    }
}

#[test]
fn single_beat_propagates_missing_without_errors() {
    let (conditioned, fs, pt, _) = synthetic_record();
    let one_peak = &pt[..1];
    let vector = extract_feature_vector(&conditioned, fs, one_peak, &[]);
    assert_eq!(vector.len(), FEATURE_COUNT);
    assert_eq!(vector.get(0), None); // template SQI needs two beats
    assert_eq!(vector.get(1), Some(0.0)); // bSQI: one vs zero peaks
    assert_eq!(vector.get(CATEGORY_OFFSETS[2]), Some(0.0)); // rr_count = 0
    for i in CATEGORY_OFFSETS[2] + 1..CATEGORY_OFFSETS[3] {
        assert_eq!(vector.get(i), None, "beat feature {i}");
    }
    // Band and phase-space categories remain present.
    assert!(vector.get(CATEGORY_OFFSETS[1]).is_some());
    assert!(vector.get(CATEGORY_OFFSETS[3]).is_some());
}

#[test]
fn extraction_is_deterministic() {
    let (conditioned, fs, pt, fd) = synthetic_record();
    let a = extract_feature_vector(&conditioned, fs, &pt, &fd);
    let b = extract_feature_vector(&conditioned, fs, &pt, &fd);
    assert_eq!(a, b);
}

#[test]
fn rps_features_are_amplitude_scale_invariant() {
    let (conditioned, fs, pt, fd) = synthetic_record();
    let scaled: Vec<f64> = conditioned.iter().map(|&v| 7.5 * v).collect();
    let a = extract_feature_vector(&conditioned, fs, &pt, &fd);
    let b = extract_feature_vector(&scaled, fs, &pt, &fd);
    // RPS, Poincare, SQI, and RR features consume normalized inputs or peak
    // indices only; band powers scale and must NOT be compared.
    for i in (0..CATEGORY_OFFSETS[1]).chain(CATEGORY_OFFSETS[2]..FEATURE_COUNT) {
        match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) => assert!(
                (x - y).abs() < 1e-9 * (1.0 + x.abs()),
                "feature {i}: {x} vs {y}"
            ),
            (x, y) => assert_eq!(x, y, "feature {i} presence"),
        }
    }
    // Band power medians do scale: 7.5^2 on power.
    let band = CATEGORY_OFFSETS[1];
    let (x, y) = (a.get(band).unwrap(), b.get(band).unwrap());
    assert!((y - 56.25 * x).abs() < 1e-6 * (1.0 + y.abs()), "{x} vs {y}");
}
