//! Mini-batch gradient descent with momentum, deterministic per seed, and
//! warm starting from a shape-compatible donor model.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::nn::loss::softmax_cross_entropy;
use crate::nn::model::Model;
use crate::spectrogram::SpectroSegment;
use crate::Result;

/// Epoch budget from the training recipe; more epochs than this is a
/// configuration error.
pub const MAX_EPOCHS: usize = 15;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Multiply the learning rate by 0.1 entering this 1-based epoch.
    pub lr_decay_epoch: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            batch_size: 16,
            learning_rate: 0.05,
            momentum: 0.9,
            lr_decay_epoch: Some(10),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
}

/// Incremental optimizer: deterministic shuffle order, one batch per step.
pub struct Trainer {
    velocities: Vec<Vec<f64>>,
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
}

impl Trainer {
    pub fn new(model: &Model, examples: usize, cfg: &TrainConfig) -> Result<Self> {
        if examples == 0 {
            return Err(Error::EmptyDataset);
        }
        if cfg.batch_size == 0 {
            return Err(Error::InvalidInput("batch size must be positive".into()));
        }
        let mut velocities = Vec::new();
        model.for_each_param(&mut |_, p| velocities.push(vec![0.0; p.len()]));
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..examples).collect();
        order.shuffle(&mut rng);
        Ok(Self {
            velocities,
            order,
            cursor: 0,
            rng,
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
            momentum: cfg.momentum,
        })
    }

    /// True when the next step starts a fresh epoch.
    pub fn at_epoch_boundary(&self) -> bool {
        self.cursor == 0
    }

    /// Run one optimization step; returns the batch loss.
    pub fn step(
        &mut self,
        model: &mut Model,
        segments: &[SpectroSegment],
        labels: &[usize],
    ) -> Result<f64> {
        if self.cursor >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let batch_idx: Vec<usize> = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        if self.cursor >= self.order.len() {
            self.cursor = 0;
            self.order.shuffle(&mut self.rng);
        }

        let batch_segments: Vec<SpectroSegment> =
            batch_idx.iter().map(|&i| segments[i].clone()).collect();
        let batch_labels: Vec<usize> = batch_idx.iter().map(|&i| labels[i]).collect();
        let x = model.segments_to_tensor(&batch_segments)?;

        let (logits, cache) = model.forward_train(&x, true)?;
        let (loss, _, d_logits) = softmax_cross_entropy(&logits, &batch_labels)?;
        let (_, grads) = model.backward(&cache, &d_logits);

        if self.learning_rate != 0.0 {
            let lr = self.learning_rate;
            let momentum = self.momentum;
            let velocities = &mut self.velocities;
            model.for_each_param_mut(&mut |slot, param| {
                let v = &mut velocities[slot];
                let g = &grads[slot];
                for i in 0..param.len() {
                    v[i] = momentum * v[i] - lr * g[i];
                    param[i] += v[i];
                }
            });
        }
        Ok(loss)
    }
}

/// Fraction of examples whose eval-mode argmax matches the label.
pub fn training_accuracy(
    model: &Model,
    segments: &[SpectroSegment],
    labels: &[usize],
) -> Result<f64> {
    let x = model.segments_to_tensor(segments)?;
    let logits = model.forward_eval(&x)?;
    let k = model.config.classes;
    let mut correct = 0usize;
    for (b, &label) in labels.iter().enumerate() {
        let row = &logits.data[b * k..(b + 1) * k];
        let argmax = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        if argmax == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / labels.len() as f64)
}

/// Train in place for `cfg.epochs` epochs; returns per-epoch loss and
/// training accuracy. Deterministic given the seed: fixed initialization is
/// the model's, fixed shuffle order is the trainer's.
pub fn train(
    model: &mut Model,
    segments: &[SpectroSegment],
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    if segments.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if segments.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} segments vs {} labels",
            segments.len(),
            labels.len()
        )));
    }
    if cfg.epochs == 0 || cfg.epochs > MAX_EPOCHS {
        return Err(Error::InvalidInput(format!(
            "epochs must be in 1..={MAX_EPOCHS}, got {}",
            cfg.epochs
        )));
    }
    if labels.iter().any(|&l| l >= model.config.classes) {
        return Err(Error::InvalidInput("label out of class range".into()));
    }

    let mut trainer = Trainer::new(model, segments.len(), cfg)?;
    let steps_per_epoch = segments.len().div_ceil(cfg.batch_size);
    let mut stats = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        if let Some(decay_at) = cfg.lr_decay_epoch {
            if epoch == decay_at {
                trainer.learning_rate *= 0.1;
            }
        }
        let mut loss_sum = 0.0;
        for _ in 0..steps_per_epoch {
            loss_sum += trainer.step(model, segments, labels)?;
        }
        stats.push(EpochStats {
            epoch,
            mean_loss: loss_sum / steps_per_epoch as f64,
            train_accuracy: training_accuracy(model, segments, labels)?,
        });
    }
    Ok(stats)
}

/// Copy all parameters and running statistics from a shape-compatible donor
/// (same growth rate, block depth, rows, and channel layout; the column
/// count may differ since no parameter depends on it).
pub fn warm_start(model: &mut Model, donor: &Model) -> Result<()> {
    let a = &model.config;
    let b = &donor.config;
    if a.growth_rate != b.growth_rate
        || a.block_layers != b.block_layers
        || a.input_channels != b.input_channels
        || a.input_rows != b.input_rows
        || a.classes != b.classes
    {
        return Err(Error::ShapeMismatch(format!(
            "warm start donor {:?} incompatible with {:?}",
            b.kind, a.kind
        )));
    }
    let mut donor_params: Vec<Vec<f64>> = Vec::new();
    donor.for_each_param(&mut |_, p| donor_params.push(p.to_vec()));
    model.for_each_param_mut(&mut |slot, p| p.copy_from_slice(&donor_params[slot]));
    let mut donor_stats: Vec<Vec<f64>> = Vec::new();
    donor.for_each_stat(&mut |_, s| donor_stats.push(s.to_vec()));
    model.for_each_stat_mut(&mut |slot, s| s.copy_from_slice(&donor_stats[slot]));
    Ok(())
}
