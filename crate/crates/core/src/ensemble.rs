//! AdaBoost with abstaining decision stumps for the NSR-vs-O decision.
//!
//! Each weak learner is a single-threshold stump that abstains (votes 0) on
//! examples whose feature is missing, so partially observed feature vectors
//! still get a verdict whenever any informative feature is present. The
//! ensemble abstains only when the weighted vote is exactly zero, which
//! includes the every-stump-abstained case.

use std::fmt::Write as _;

use crate::error::Error;
use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::Result;

/// Binary class for post-processor training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostClass {
    Nsr,
    Other,
}

impl PostClass {
    fn sign(self) -> f64 {
        match self {
            PostClass::Nsr => 1.0,
            PostClass::Other => -1.0,
        }
    }
}

/// Ensemble verdict. `Abstain` leaves the upstream label in place.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostDecision {
    Nsr,
    Other,
    Abstain,
}

/// One abstaining threshold rule: votes `polarity` below the threshold,
/// `-polarity` at or above it, 0 when the feature is missing.
#[derive(Debug, Clone, PartialEq)]
pub struct Stump {
    pub feature_index: usize,
    pub threshold: f64,
    pub polarity: i8,
    pub alpha: f64,
}

impl Stump {
    fn vote(&self, x: &FeatureVector) -> f64 {
        match x.get(self.feature_index) {
            None => 0.0,
            Some(v) => {
                let h = if v < self.threshold { 1.0 } else { -1.0 };
                h * self.polarity as f64
            }
        }
    }
}

/// Trained boosted ensemble over the 437-feature registry.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstainModel {
    pub stumps: Vec<Stump>,
}

impl AbstainModel {
    /// Distinct feature indices used by the ensemble, ascending.
    pub fn selected_features(&self) -> Vec<usize> {
        let mut indices: Vec<usize> = self.stumps.iter().map(|s| s.feature_index).collect();
        indices.sort_unstable();
        indices.dedup();
        indices
    }
}

/// Per-round training diagnostics.
#[derive(Debug, Clone)]
pub struct BoostLog {
    /// Example-weight total after each round's renormalization.
    pub weight_sums: Vec<f64>,
    /// Penalized weighted error of each round's chosen stump.
    pub round_errors: Vec<f64>,
}

/// Train `rounds` abstaining stumps with discrete AdaBoost.
///
/// Stump selection minimizes the weighted error over non-abstaining
/// examples plus half the weight of abstaining ones; thresholds are searched
/// at midpoints of consecutive distinct feature values with deterministic
/// tie-breaking (lowest feature index, then lowest threshold, then the
/// below-is-NSR polarity). Example weights of abstaining examples are left
/// untouched before renormalization, so boosting routes around missingness.
pub fn train_adaboost_abstain(
    x: &[FeatureVector],
    y: &[PostClass],
    rounds: usize,
) -> Result<AbstainModel> {
    train_adaboost_abstain_with_log(x, y, rounds).map(|(model, _)| model)
}

pub fn train_adaboost_abstain_with_log(
    x: &[FeatureVector],
    y: &[PostClass],
    rounds: usize,
) -> Result<(AbstainModel, BoostLog)> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} feature vectors vs {} labels",
            x.len(),
            y.len()
        )));
    }
    if rounds == 0 {
        return Err(Error::InvalidInput("need at least one boosting round".into()));
    }
    let nsr = y.iter().filter(|&&c| c == PostClass::Nsr).count();
    let other = y.len() - nsr;
    if nsr < 2 || other < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 examples per class, got {nsr} NSR / {other} O"
        )));
    }

    let n = x.len();
    let signs: Vec<f64> = y.iter().map(|c| c.sign()).collect();
    let mut weights = vec![1.0 / n as f64; n];

    // Per-feature sorted index lists, built once.
    let mut feature_order: Vec<Vec<usize>> = Vec::with_capacity(FEATURE_COUNT);
    for f in 0..FEATURE_COUNT {
        let mut present: Vec<usize> = (0..n).filter(|&i| x[i].get(f).is_some()).collect();
        present.sort_by(|&a, &b| x[a].get(f).unwrap().total_cmp(&x[b].get(f).unwrap()));
        feature_order.push(present);
    }

    let mut stumps: Vec<Stump> = Vec::with_capacity(rounds);
    let mut log = BoostLog {
        weight_sums: Vec::with_capacity(rounds),
        round_errors: Vec::with_capacity(rounds),
    };

    for _round in 0..rounds {
        let mut best: Option<(f64, usize, f64, i8)> = None;

        for (f, order) in feature_order.iter().enumerate() {
            if order.len() < 2 {
                continue;
            }
            let present_weight: f64 = order.iter().map(|&i| weights[i]).sum();
            let missing_weight = 1.0 - present_weight;
            let positive_present: f64 = order
                .iter()
                .filter(|&&i| signs[i] > 0.0)
                .map(|&i| weights[i])
                .sum();
            let negative_present = present_weight - positive_present;

            // Walk thresholds between consecutive distinct values keeping
            // running class-weight sums of the "below" side.
            let mut below_pos = 0.0;
            let mut below_neg = 0.0;
            for k in 0..order.len() - 1 {
                let i = order[k];
                if signs[i] > 0.0 {
                    below_pos += weights[i];
                } else {
                    below_neg += weights[i];
                }
                let v_here = x[i].get(f).unwrap();
                let v_next = x[order[k + 1]].get(f).unwrap();
                if v_here == v_next {
                    continue;
                }
                let threshold = (v_here + v_next) / 2.0;
                // polarity +1: predict NSR below the threshold.
                let err_pos = below_neg + (positive_present - below_pos);
                // polarity -1: predict O below the threshold.
                let err_neg = below_pos + (negative_present - below_neg);
                for (err, polarity) in [(err_pos, 1i8), (err_neg, -1i8)] {
                    let score = err + 0.5 * missing_weight;
                    if best.as_ref().is_none_or(|&(s, _, _, _)| score < s) {
                        best = Some((score, f, threshold, polarity));
                    }
                }
            }
        }

        let Some((score, feature_index, threshold, polarity)) = best else {
            break; // no feature has two distinct present values left
        };

        let epsilon = score.clamp(1e-10, 1.0 - 1e-10);
        let alpha = 0.5 * ((1.0 - epsilon) / epsilon).ln();
        let stump = Stump {
            feature_index,
            threshold,
            polarity,
            alpha,
        };

        for i in 0..n {
            let h = stump.vote(&x[i]);
            if h != 0.0 {
                weights[i] *= (-alpha * signs[i] * h).exp();
            }
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }

        log.weight_sums.push(weights.iter().sum());
        log.round_errors.push(epsilon);
        stumps.push(stump);
    }

    Ok((AbstainModel { stumps }, log))
}

/// Signed weighted vote over all non-abstaining stumps.
///
/// Positive scores mean NSR, negative mean O; an exactly zero score (which
/// includes every stump abstaining) is an abstention.
pub fn predict_abstain(model: &AbstainModel, x: &FeatureVector) -> (PostDecision, f64) {
    let score: f64 = model.stumps.iter().map(|s| s.alpha * s.vote(x)).sum();
    let decision = if score > 0.0 {
        PostDecision::Nsr
    } else if score < 0.0 {
        PostDecision::Other
    } else {
        PostDecision::Abstain
    };
    (decision, score)
}

/// Rank-based area under the ROC curve of the ensemble score against the
/// labels, ties counted half. NSR is the positive class.
pub fn roc_auc(model: &AbstainModel, x: &[FeatureVector], y: &[PostClass]) -> Result<f64> {
    let scores: Vec<f64> = x.iter().map(|v| predict_abstain(model, v).1).collect();
    auc_from_scores(&scores, y)
}

/// Mann-Whitney AUC with average ranks for tied scores.
pub fn auc_from_scores(scores: &[f64], y: &[PostClass]) -> Result<f64> {
    if scores.len() != y.len() {
        return Err(Error::InvalidInput("score/label length mismatch".into()));
    }
    let positives = y.iter().filter(|&&c| c == PostClass::Nsr).count();
    let negatives = y.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::InvalidInput("AUC needs both classes".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Average 1-based rank across the tie group [i, j).
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if y[idx] == PostClass::Nsr {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let p = positives as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

// ---------------------------------------------------------------------------
// Serialization: text header plus one line per stump; floats round-trip
// bit-exactly through Rust's shortest-representation formatting.
// ---------------------------------------------------------------------------

pub fn serialize_model(model: &AbstainModel) -> String {
    let mut out = String::new();
    out.push_str("adaboost-abstain v1\n");
    out.push_str("classes NSR O\n");
    let _ = writeln!(out, "rounds {}", model.stumps.len());
    for s in &model.stumps {
        let _ = writeln!(
            out,
            "stump {} {} {} {}",
            s.feature_index, s.threshold, s.polarity, s.alpha
        );
    }
    out
}

pub fn deserialize_model(text: &str) -> Result<AbstainModel> {
    let mut lines = text.lines();
    let magic = lines.next().unwrap_or_default();
    if magic != "adaboost-abstain v1" {
        return Err(Error::Format(format!("bad post-model magic line `{magic}`")));
    }
    let classes = lines.next().unwrap_or_default();
    if classes != "classes NSR O" {
        return Err(Error::Format(format!("bad class line `{classes}`")));
    }
    let rounds_line = lines.next().unwrap_or_default();
    let rounds: usize = rounds_line
        .strip_prefix("rounds ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad rounds line `{rounds_line}`")))?;

    let mut stumps = Vec::with_capacity(rounds);
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "stump" {
            return Err(Error::Format(format!("bad stump line `{line}`")));
        }
        let parse_err = || Error::Format(format!("bad stump line `{line}`"));
        let feature_index: usize = fields[1].parse().map_err(|_| parse_err())?;
        if feature_index >= FEATURE_COUNT {
            return Err(Error::Format(format!(
                "stump feature index {feature_index} out of range"
            )));
        }
        let threshold: f64 = fields[2].parse().map_err(|_| parse_err())?;
        let polarity: i8 = fields[3].parse().map_err(|_| parse_err())?;
        if polarity != 1 && polarity != -1 {
            return Err(Error::Format(format!("stump polarity must be +-1, got {polarity}")));
        }
        let alpha: f64 = fields[4].parse().map_err(|_| parse_err())?;
        stumps.push(Stump {
            feature_index,
            threshold,
            polarity,
            alpha,
        });
    }
    if stumps.len() != rounds {
        return Err(Error::Format(format!(
            "header declares {rounds} stumps, found {}",
            stumps.len()
        )));
    }
    Ok(AbstainModel { stumps })
}
