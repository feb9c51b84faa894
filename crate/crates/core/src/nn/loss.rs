//! Softmax cross-entropy with a numerically stable log-sum-exp.

use crate::error::Error;
use crate::nn::tensor::Tensor4;
use crate::Result;

/// Mean cross-entropy over the batch.
///
/// Returns the loss, per-example softmax probabilities (row-major `n x k`),
/// and the gradient with respect to the logits, `(softmax - onehot) / n`.
pub fn softmax_cross_entropy(
    logits: &Tensor4,
    labels: &[usize],
) -> Result<(f64, Vec<f64>, Tensor4)> {
    let (n, k) = (logits.n, logits.c);
    if logits.h != 1 || logits.w != 1 {
        return Err(Error::ShapeMismatch("logits must be (n, k, 1, 1)".into()));
    }
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for batch of {n}",
            labels.len()
        )));
    }
    if labels.iter().any(|&l| l >= k) {
        return Err(Error::InvalidInput(format!("label out of range 0..{k}")));
    }

    let mut probabilities = vec![0.0; n * k];
    let mut grad = Tensor4::zeros(n, k, 1, 1);
    let mut loss = 0.0;
    for b in 0..n {
        let row = &logits.data[b * k..(b + 1) * k];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
        loss -= row[labels[b]] - log_sum;
        for j in 0..k {
            let p = (row[j] - log_sum).exp();
            probabilities[b * k + j] = p;
            let onehot = if j == labels[b] { 1.0 } else { 0.0 };
            grad.data[b * k + j] = (p - onehot) / n as f64;
        }
    }
    Ok((loss / n as f64, probabilities, grad))
}

/// Softmax of one logit row.
pub fn softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::max_relative_error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_logits_cost_ln4() {
        let logits = Tensor4::from_vec(2, 4, 1, 1, vec![0.7; 8]).unwrap();
        let (loss, probabilities, _) = softmax_cross_entropy(&logits, &[0, 3]).unwrap();
        assert!((loss - 4.0_f64.ln()).abs() < 1e-12);
        for &p in &probabilities {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn confident_correct_logit_has_negligible_loss() {
        let logits = Tensor4::from_vec(1, 4, 1, 1, vec![10.0, -10.0, -10.0, -10.0]).unwrap();
        let (loss, _, _) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!(loss < 1e-8, "loss {loss}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let logits = Tensor4::from_vec(3, 4, 1, 1, data.clone()).unwrap();
        let labels = [1usize, 0, 3];
        let (_, _, grad) = softmax_cross_entropy(&logits, &labels).unwrap();

        let h = 1e-6;
        let mut numeric = Vec::with_capacity(12);
        let mut vals = data;
        for i in 0..vals.len() {
            let orig = vals[i];
            vals[i] = orig + h;
            let up = softmax_cross_entropy(
                &Tensor4::from_vec(3, 4, 1, 1, vals.clone()).unwrap(),
                &labels,
            )
            .unwrap()
            .0;
            vals[i] = orig - h;
            let down = softmax_cross_entropy(
                &Tensor4::from_vec(3, 4, 1, 1, vals.clone()).unwrap(),
                &labels,
            )
            .unwrap()
            .0;
            vals[i] = orig;
            numeric.push((up - down) / (2.0 * h));
        }
        assert!(max_relative_error(&grad.data, &numeric) < 1e-6);
    }

    #[test]
    fn softmax_stays_on_the_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let row: Vec<f64> = (0..4).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let p = softmax_row(&row);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
