//! The fixed, ordered registry of the 437 feature names.
//!
//! Category layout: signal quality (2), frequency content (10),
//! beat-to-beat (11), reconstructed phase space (401), Poincare section (13).

use std::sync::OnceLock;

pub const FEATURE_COUNT: usize = 437;
pub const CATEGORY_SIZES: [usize; 5] = [2, 10, 11, 401, 13];

/// Start index of each category in registry order.
pub const CATEGORY_OFFSETS: [usize; 5] = [0, 2, 12, 23, 424];

pub const BAND_EDGES_HZ: [(f64, f64); 9] = [
    (1.0, 15.0),
    (15.0, 30.0),
    (30.0, 45.0),
    (45.0, 60.0),
    (60.0, 75.0),
    (75.0, 90.0),
    (90.0, 150.0),
    (5.0, 14.0),
    (5.0, 50.0),
];

/// Feature names in registry order; index `i` names feature `i`.
pub fn feature_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut names = Vec::with_capacity(FEATURE_COUNT);
        names.push("sqi_template".to_string());
        names.push("sqi_bsqi".to_string());
        for (lo, hi) in BAND_EDGES_HZ {
            names.push(format!("band_median_{}_{}", lo as u32, hi as u32));
        }
        names.push("band_ratio_5_14_to_5_50".to_string());
        for name in [
            "rr_count",
            "rr_min_ms",
            "rr_max_ms",
            "rr_median_ms",
            "rr_mean_ms",
            "rr_sdnn_ms",
            "rr_rmssd_ms",
            "hr_mean_bpm",
            "hra_pi",
            "hra_gi",
            "hra_si",
        ] {
            names.push(name.to_string());
        }
        for r in 0..20 {
            for c in 0..20 {
                names.push(format!("rps_cell_r{r:02}_c{c:02}"));
            }
        }
        names.push("rps_sfi".to_string());
        for name in [
            "ps_crossing_count",
            "ps_crossings_per_1000",
            "ps_crossing_mean",
            "ps_crossing_sd",
            "ps_crossing_min",
            "ps_crossing_max",
            "ps_gap_mean",
            "ps_gap_sd",
            "ps_dist_mean",
            "ps_dist_max",
            "ps_fraction_above",
            "ps_excursion_mean",
            "ps_excursion_sd",
        ] {
            names.push(name.to_string());
        }
        assert_eq!(names.len(), FEATURE_COUNT);
        names
    })
}
