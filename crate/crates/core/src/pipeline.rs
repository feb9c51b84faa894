//! End-to-end routing, challenge scoring, and stratified data splitting.
//!
//! `classify_record` follows the gate order: too few beats or a failed
//! signal-quality check short-circuits to noise; otherwise QRS-aligned
//! spectrogram segments are classified by the duration-appropriate network,
//! and an ambiguous N-vs-O verdict is deferred to the feature-based
//! post-classifier.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ensemble::{predict_abstain, AbstainModel, PostDecision};
use crate::error::Error;
use crate::features::extract_feature_vector;
use crate::io::record::EcgRecord;
use crate::nn::ModelKind;
use crate::qrs;
use crate::signal;
use crate::spectrogram::{self, SpectroSegment};
use crate::sqi;
use crate::Result;

/// The four rhythm classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RhythmLabel {
    /// Normal sinus rhythm.
    Normal,
    /// Atrial fibrillation.
    Afib,
    /// Other rhythm.
    Other,
    /// Noisy recording.
    Noise,
}

impl RhythmLabel {
    pub const ALL: [RhythmLabel; 4] = [
        RhythmLabel::Normal,
        RhythmLabel::Afib,
        RhythmLabel::Other,
        RhythmLabel::Noise,
    ];

    pub fn as_char(self) -> char {
        match self {
            RhythmLabel::Normal => 'N',
            RhythmLabel::Afib => 'A',
            RhythmLabel::Other => 'O',
            RhythmLabel::Noise => '~',
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "N" => Some(RhythmLabel::Normal),
            "A" => Some(RhythmLabel::Afib),
            "O" => Some(RhythmLabel::Other),
            "~" => Some(RhythmLabel::Noise),
            _ => None,
        }
    }

    /// Index into probability vectors, ordered `N A O ~`.
    pub fn index(self) -> usize {
        match self {
            RhythmLabel::Normal => 0,
            RhythmLabel::Afib => 1,
            RhythmLabel::Other => 2,
            RhythmLabel::Noise => 3,
        }
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }
}

impl std::fmt::Display for RhythmLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Gate thresholds and model-selection durations.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Records pass the quality gate only with template SQI strictly above this.
    pub sqi_threshold: f64,
    /// Post-processing fires when `|p_N - p_O|` is strictly below this.
    pub prob_diff_threshold: f64,
    /// Minimum duration handled by the main model.
    pub main_seconds: f64,
    /// Challenge minimum record duration; shorter records are an error.
    pub secondary_seconds: f64,
    /// Fewer detected beats than this short-circuits to noise.
    pub min_peaks: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sqi_threshold: 0.5,
            prob_diff_threshold: 0.4,
            main_seconds: 15.0,
            secondary_seconds: 9.0,
            min_peaks: 2,
        }
    }
}

/// Anything that turns spectrogram segments into class probabilities.
///
/// Implemented by [`crate::nn::Model`]; test doubles implement it to pin the
/// routing logic without trained weights.
pub trait SegmentClassifier {
    /// Width in frames of the segments this classifier accepts.
    fn segment_width(&self) -> usize;
    fn class_probabilities(&self, segments: &[SpectroSegment]) -> Result<[f64; 4]>;
}

/// Anything that can arbitrate an ambiguous N-vs-O decision.
///
/// Implemented by [`AbstainModel`].
pub trait NsrOtherArbiter {
    fn decide(&self, features: &crate::features::FeatureVector) -> PostDecision;
}

impl NsrOtherArbiter for AbstainModel {
    fn decide(&self, features: &crate::features::FeatureVector) -> PostDecision {
        predict_abstain(self, features).0
    }
}

/// Which path a record took through the decision graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Fewer than `min_peaks` beats found; noise without SQI evaluation.
    TooFewPeaks,
    /// Template SQI missing or at/below threshold; noise.
    SqiGate,
    /// CNN verdict stood; post-processing not triggered.
    CnnDirect,
    /// Post-processor fired and returned an N or O verdict.
    PostOverride,
    /// Post-processor fired but abstained; CNN label kept.
    PostAbstain,
}

/// Execution trace of one classification, for auditing branch coverage.
#[derive(Debug, Clone)]
pub struct ClassifyTrace {
    pub branch: Branch,
    pub peaks_pan_tompkins: usize,
    pub peaks_filtered_derivative: usize,
    pub template_sqi: Option<f64>,
    pub cnn_invoked: bool,
    pub model_kind: Option<ModelKind>,
    pub segments_used: usize,
    /// Segment extraction found no complete QRS-anchored window and fell
    /// back to a single segment at frame 0.
    pub fallback_segment: bool,
    pub post_invoked: bool,
    pub post_decision: Option<PostDecision>,
}

/// Result of classifying one record.
#[derive(Debug, Clone)]
pub struct Classification {
    pub label: RhythmLabel,
    /// Class probabilities `[N, A, O, ~]`; uniform when the CNN never ran.
    pub probabilities: [f64; 4],
    pub trace: ClassifyTrace,
}

/// Classify one record through the full decision graph.
///
/// Records not sampled at 300 Hz are resampled first so that segment widths
/// keep their 15 s / 9 s meaning. Model choice is by duration: at least
/// `main_seconds` selects `main`, anything shorter (but at least
/// `secondary_seconds`) selects `secondary`.
pub fn classify_record<M, S, P>(
    record: &EcgRecord,
    main: &M,
    secondary: &S,
    post: &P,
    cfg: &PipelineConfig,
) -> Result<Classification>
where
    M: SegmentClassifier,
    S: SegmentClassifier,
    P: NsrOtherArbiter,
{
    let duration = record.duration_s();
    if duration < cfg.secondary_seconds {
        return Err(Error::BelowMinimumDuration(format!(
            "record {} is {duration:.2} s, need at least {} s",
            record.id, cfg.secondary_seconds
        )));
    }

    const TARGET_FS: f64 = 300.0;
    let fs = TARGET_FS;
    let resampled;
    let raw = if record.sampling_rate == TARGET_FS {
        &record.samples
    } else {
        resampled = signal::resample_linear(&record.samples, record.sampling_rate, TARGET_FS)?;
        &resampled
    };
    let conditioned = signal::remove_baseline(raw, fs)?;

    let peaks_pt = qrs::detect_pan_tompkins(&conditioned, fs)?;
    let peaks_fd = qrs::detect_filtered_derivative(&conditioned, fs)?;

    let mut trace = ClassifyTrace {
        branch: Branch::CnnDirect,
        peaks_pan_tompkins: peaks_pt.len(),
        peaks_filtered_derivative: peaks_fd.len(),
        template_sqi: None,
        cnn_invoked: false,
        model_kind: None,
        segments_used: 0,
        fallback_segment: false,
        post_invoked: false,
        post_decision: None,
    };
    let uniform = [0.25; 4];

    if peaks_pt.len() < cfg.min_peaks {
        trace.branch = Branch::TooFewPeaks;
        return Ok(Classification {
            label: RhythmLabel::Noise,
            probabilities: uniform,
            trace,
        });
    }

    let template_sqi = sqi::template_match_sqi(&conditioned, fs, &peaks_pt);
    trace.template_sqi = template_sqi;
    if !template_sqi.is_some_and(|v| v > cfg.sqi_threshold) {
        trace.branch = Branch::SqiGate;
        return Ok(Classification {
            label: RhythmLabel::Noise,
            probabilities: uniform,
            trace,
        });
    }

    let spec = spectrogram::stft_magnitude(&conditioned, fs)?;
    let use_main = duration >= cfg.main_seconds;
    trace.model_kind = Some(if use_main {
        ModelKind::Main
    } else {
        ModelKind::Secondary
    });
    let width = if use_main {
        main.segment_width()
    } else {
        secondary.segment_width()
    };

    let mut segments = spectrogram::extract_segments(&spec, &peaks_pt, width)?;
    if segments.is_empty() {
        segments = spectrogram::extract_segments(&spec, &[0], width)?;
        trace.fallback_segment = true;
        if segments.is_empty() {
            return Err(Error::InsufficientSignal(format!(
                "record {}: spectrogram has {} frames, segment needs {width}",
                record.id, spec.frames
            )));
        }
    }
    trace.segments_used = segments.len();
    trace.cnn_invoked = true;

    let probabilities = if use_main {
        main.class_probabilities(&segments)?
    } else {
        secondary.class_probabilities(&segments)?
    };
    let argmax = probabilities
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut label = RhythmLabel::from_index(argmax);

    let p_n = probabilities[RhythmLabel::Normal.index()];
    let p_o = probabilities[RhythmLabel::Other.index()];
    let ambiguous = matches!(label, RhythmLabel::Normal | RhythmLabel::Other)
        && (p_n - p_o).abs() < cfg.prob_diff_threshold;
    if ambiguous {
        trace.post_invoked = true;
        let features = extract_feature_vector(&conditioned, fs, &peaks_pt, &peaks_fd);
        let decision = post.decide(&features);
        trace.post_decision = Some(decision);
        match decision {
            PostDecision::Nsr => {
                label = RhythmLabel::Normal;
                trace.branch = Branch::PostOverride;
            }
            PostDecision::Other => {
                label = RhythmLabel::Other;
                trace.branch = Branch::PostOverride;
            }
            PostDecision::Abstain => {
                trace.branch = Branch::PostAbstain;
            }
        }
    }

    Ok(Classification {
        label,
        probabilities,
        trace,
    })
}

/// Per-class F1 and their mean for the three scored classes.
///
/// `~` never gets its own score; it contributes false positives and false
/// negatives to the scored classes. A class absent from both slices has no
/// defined F1 and is excluded from the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Scores {
    pub normal: Option<f64>,
    pub afib: Option<f64>,
    pub other: Option<f64>,
    pub mean: Option<f64>,
}

pub fn evaluate_f1(predicted: &[RhythmLabel], truth: &[RhythmLabel]) -> Result<F1Scores> {
    if predicted.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "prediction/truth length mismatch: {} vs {}",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidInput("nothing to score".into()));
    }

    let f1_for = |class: RhythmLabel| -> Option<f64> {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p == class, t == class) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        if tp + fp + fn_ == 0 {
            None
        } else {
            Some(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64)
        }
    };

    let normal = f1_for(RhythmLabel::Normal);
    let afib = f1_for(RhythmLabel::Afib);
    let other = f1_for(RhythmLabel::Other);
    let present: Vec<f64> = [normal, afib, other].into_iter().flatten().collect();
    let mean = if present.is_empty() {
        None
    } else {
        Some(present.iter().sum::<f64>() / present.len() as f64)
    };
    Ok(F1Scores {
        normal,
        afib,
        other,
        mean,
    })
}

/// Deal each class round-robin into `k` folds after a seeded shuffle.
///
/// Returns the fold index of every record. Per-class fold counts differ by
/// at most one; the same seed always yields the same assignment.
pub fn stratified_kfold(labels: &[RhythmLabel], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidInput("need at least 2 folds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; labels.len()];
    for class in RhythmLabel::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(Error::InvalidInput(format!(
                "class {} has {} records, fewer than {k} folds",
                class,
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for (pos, idx) in members.into_iter().enumerate() {
            assignment[idx] = pos % k;
        }
    }
    Ok(assignment)
}
