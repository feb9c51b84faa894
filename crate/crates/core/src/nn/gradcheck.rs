//! Central finite-difference verification of analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::nn::loss::softmax_cross_entropy;
use crate::nn::model::{Model, ModelConfig};
use crate::nn::tensor::Tensor4;
use crate::Result;

/// Perturbation step for central differences.
pub const FD_STEP: f64 = 1e-5;
/// Largest model the end-to-end check will accept.
pub const MAX_CHECK_PARAMS: usize = 5_000;

/// `|a - n| / max(|a|, |n|, 1e-3)`, maximized over components.
///
/// The floor keeps near-zero gradients from amplifying the O(1e-10)
/// round-off of double-precision central differences into false alarms
/// while still catching any error that matters at the loss scale.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-3))
        .fold(0.0, f64::max)
}

/// Check every parameter and every input entry of a reduced model against
/// central finite differences of the softmax cross-entropy loss.
///
/// Batch-norm runs in training mode with running-statistic updates disabled
/// so the loss is a pure function of parameters and input. Returns the
/// maximum relative error over all checked entries.
pub fn model_gradient_check(config: ModelConfig, seed: u64) -> Result<f64> {
    let mut model = Model::new(config, seed)?;
    if model.parameter_count() > MAX_CHECK_PARAMS {
        return Err(Error::InvalidInput(format!(
            "gradient check limited to {MAX_CHECK_PARAMS} parameters, model has {}",
            model.parameter_count()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let n = 2;
    let len = n * config.input_channels * config.input_rows * config.input_cols;
    let input = Tensor4::from_vec(
        n,
        config.input_channels,
        config.input_rows,
        config.input_cols,
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )?;
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..config.classes)).collect();

    // Analytic gradients.
    let (logits, cache) = model.forward_train(&input, false)?;
    let (_, _, d_logits) = softmax_cross_entropy(&logits, &labels)?;
    let (d_input, grads) = model.backward(&cache, &d_logits);

    let loss_of = |model: &mut Model, x: &Tensor4| -> f64 {
        let (logits, _) = model.forward_train(x, false).expect("forward");
        softmax_cross_entropy(&logits, &labels).expect("loss").0
    };

    let mut max_err = 0.0f64;

    // Parameters, slot by slot.
    let slot_count = grads.len();
    for slot in 0..slot_count {
        let param_len = grads[slot].len();
        for i in 0..param_len {
            let set = |m: &mut Model, value_delta: f64| {
                m.for_each_param_mut(&mut |s, p| {
                    if s == slot {
                        p[i] += value_delta;
                    }
                });
            };
            set(&mut model, FD_STEP);
            let up = loss_of(&mut model, &input);
            set(&mut model, -2.0 * FD_STEP);
            let down = loss_of(&mut model, &input);
            set(&mut model, FD_STEP);
            let numeric = (up - down) / (2.0 * FD_STEP);
            let analytic = grads[slot][i];
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
            max_err = max_err.max(err);
        }
    }

    // Input entries.
    let mut x = input.clone();
    for i in 0..x.data.len() {
        let orig = x.data[i];
        x.data[i] = orig + FD_STEP;
        let up = loss_of(&mut model, &x);
        x.data[i] = orig - FD_STEP;
        let down = loss_of(&mut model, &x);
        x.data[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let analytic = d_input.data[i];
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
        max_err = max_err.max(err);
    }

    Ok(max_err)
}
