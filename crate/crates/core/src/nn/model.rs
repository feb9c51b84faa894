//! DenseNet construction, forward/backward orchestration, and prediction.
//!
//! Architecture: a 3x3 stem producing `2k` channels, three dense blocks of
//! `L` layers (pre-activation row-wise BN -> ReLU -> 3x3 conv emitting `k`
//! channels, input concatenated with every previous output), transitions
//! with a channel-halving 1x1 conv and 2x2 average pooling, then BN -> ReLU
//! -> global average pooling -> affine classifier. With `L = 12` the layer
//! count is 1 + 36 + 2 + 1 = 40.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::nn::layers::{
    avgpool2_backward, avgpool2_forward, global_avgpool_backward, global_avgpool_forward,
    relu_backward, relu_forward, Affine, BnCache, Conv2d, RowwiseBatchNorm,
};
use crate::nn::loss::softmax_row;
use crate::nn::tensor::Tensor4;
use crate::pipeline::SegmentClassifier;
use crate::spectrogram::SpectroSegment;
use crate::Result;

/// Dense blocks add `k` channels per layer on top of the block input.
pub fn dense_block_output_channels(c_in: usize, layers: usize, growth_rate: usize) -> usize {
    c_in + layers * growth_rate
}

/// Run one standalone dense block over `input`: each layer applies row-wise
/// BN -> ReLU -> 3x3 conv emitting `growth_rate` channels on the
/// concatenation of the block input and all previous layer outputs; the
/// result concatenates input and every layer output.
///
/// Weights are seeded He-normal, batch statistics are used (training mode,
/// no running-stat updates). The output starts with the input channels
/// verbatim.
pub fn dense_block_forward(
    input: &Tensor4,
    layers: usize,
    growth_rate: usize,
    seed: u64,
) -> Result<Tensor4> {
    if layers == 0 || growth_rate == 0 {
        return Err(Error::InvalidInput("layers and growth rate must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pieces: Vec<Tensor4> = vec![input.clone()];
    for i in 0..layers {
        let c_in = input.c + i * growth_rate;
        let mut bn = RowwiseBatchNorm::new(c_in, input.h);
        let mut conv = Conv2d::new(c_in, growth_rate, 3, 3, 1, 1)?;
        let fan_in = (c_in * 9) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
        for w in &mut conv.weights {
            *w = normal.sample(&mut rng);
        }
        let refs: Vec<&Tensor4> = pieces.iter().collect();
        let cat = Tensor4::concat_channels(&refs);
        let (bn_out, _) = bn.forward_train(&cat, false)?;
        let act = relu_forward(&bn_out);
        pieces.push(conv.forward(&act)?);
    }
    let refs: Vec<&Tensor4> = pieces.iter().collect();
    Ok(Tensor4::concat_channels(&refs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// 15-second model: growth rate 6, input 20x375.
    Main,
    /// 9-second model: growth rate 4, input 20x225.
    Secondary,
    /// Reduced or experimental geometry.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub growth_rate: usize,
    /// Layers per dense block.
    pub block_layers: usize,
    pub input_channels: usize,
    pub input_rows: usize,
    pub input_cols: usize,
    pub classes: usize,
}

impl ModelConfig {
    pub fn main() -> Self {
        Self {
            kind: ModelKind::Main,
            growth_rate: 6,
            block_layers: 12,
            input_channels: 1,
            input_rows: 20,
            input_cols: 375,
            classes: 4,
        }
    }

    pub fn secondary() -> Self {
        Self {
            kind: ModelKind::Secondary,
            growth_rate: 4,
            block_layers: 12,
            input_channels: 1,
            input_rows: 20,
            input_cols: 225,
            classes: 4,
        }
    }

    /// Small geometry for tests and gradient checking.
    pub fn reduced(growth_rate: usize, block_layers: usize, rows: usize, cols: usize) -> Self {
        Self {
            kind: ModelKind::Custom,
            growth_rate,
            block_layers,
            input_channels: 1,
            input_rows: rows,
            input_cols: cols,
            classes: 4,
        }
    }

    /// Stem + three blocks + two transitions + classifier.
    pub fn depth(&self) -> usize {
        1 + 3 * self.block_layers + 2 + 1
    }

    fn validate(&self) -> Result<()> {
        if self.growth_rate == 0 || self.block_layers == 0 || self.classes == 0 {
            return Err(Error::InvalidInput("model dimensions must be positive".into()));
        }
        if self.input_rows < 4 || self.input_cols < 4 {
            return Err(Error::InvalidInput(
                "input must survive two 2x2 poolings".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct DenseUnit {
    bn: RowwiseBatchNorm,
    conv: Conv2d,
}

#[derive(Debug, Clone)]
struct DenseBlockLayer {
    units: Vec<DenseUnit>,
}

#[derive(Debug, Clone)]
struct Transition {
    bn: RowwiseBatchNorm,
    conv: Conv2d,
}

/// A built (possibly trained) network. Immutable models are safe to share
/// across threads for prediction; training takes exclusive access.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub seed: u64,
    stem: Conv2d,
    blocks: Vec<DenseBlockLayer>,
    transitions: Vec<Transition>,
    head_bn: RowwiseBatchNorm,
    classifier: Affine,
}

/// Build the standard architecture for a model kind with default seed 0.
pub fn build_model(kind: ModelKind) -> Model {
    let config = match kind {
        ModelKind::Main => ModelConfig::main(),
        ModelKind::Secondary => ModelConfig::secondary(),
        ModelKind::Custom => ModelConfig::reduced(4, 4, 20, 225),
    };
    Model::new(config, 0).expect("standard configs are valid")
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let k = config.growth_rate;
        let l = config.block_layers;

        let mut channels = 2 * k;
        let mut rows = config.input_rows;

        let stem = Conv2d::new(config.input_channels, channels, 3, 3, 1, 1)?;
        let mut blocks = Vec::with_capacity(3);
        let mut transitions = Vec::with_capacity(2);
        for b in 0..3 {
            let mut units = Vec::with_capacity(l);
            for i in 0..l {
                let c_in = channels + i * k;
                units.push(DenseUnit {
                    bn: RowwiseBatchNorm::new(c_in, rows),
                    conv: Conv2d::new(c_in, k, 3, 3, 1, 1)?,
                });
            }
            blocks.push(DenseBlockLayer { units });
            channels = dense_block_output_channels(channels, l, k);
            if b < 2 {
                let halved = (channels / 2).max(1);
                transitions.push(Transition {
                    bn: RowwiseBatchNorm::new(channels, rows),
                    conv: Conv2d::new(channels, halved, 1, 1, 1, 0)?,
                });
                channels = halved;
                rows /= 2;
            }
        }
        let head_bn = RowwiseBatchNorm::new(channels, rows);
        let classifier = Affine::new(channels, config.classes);

        let mut model = Self {
            config,
            seed,
            stem,
            blocks,
            transitions,
            head_bn,
            classifier,
        };
        model.initialize(seed);
        Ok(model)
    }

    /// He fan-in normal initialization for convolution and affine weights,
    /// zero biases, identity batch-norm affine. Deterministic per seed.
    fn initialize(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init_conv = |conv: &mut Conv2d, rng: &mut ChaCha8Rng| {
            let fan_in = (conv.in_c * conv.kh * conv.kw) as f64;
            let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
            for w in &mut conv.weights {
                *w = normal.sample(rng);
            }
            for b in &mut conv.bias {
                *b = 0.0;
            }
        };
        init_conv(&mut self.stem, &mut rng);
        for bi in 0..self.blocks.len() {
            for ui in 0..self.blocks[bi].units.len() {
                init_conv(&mut self.blocks[bi].units[ui].conv, &mut rng);
            }
            if bi < self.transitions.len() {
                init_conv(&mut self.transitions[bi].conv, &mut rng);
            }
        }
        let fan_in = self.classifier.in_dim as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
        for w in &mut self.classifier.weights {
            *w = normal.sample(&mut rng);
        }
    }

    pub fn parameter_count(&self) -> usize {
        let mut count = self.stem.parameter_count();
        for block in &self.blocks {
            for unit in &block.units {
                count += unit.bn.parameter_count() + unit.conv.parameter_count();
            }
        }
        for t in &self.transitions {
            count += t.bn.parameter_count() + t.conv.parameter_count();
        }
        count + self.head_bn.parameter_count() + self.classifier.parameter_count()
    }

    // -- parameter visitors (canonical order) --------------------------------

    /// Visit every parameter vector in canonical order: stem (w, b); per
    /// block, per unit (gamma, beta, conv w, conv b) then its transition;
    /// head BN; classifier.
    pub fn for_each_param_mut(&mut self, f: &mut dyn FnMut(usize, &mut Vec<f64>)) {
        let mut slot = 0;
        let visit = |slot: &mut usize, v: &mut Vec<f64>, f: &mut dyn FnMut(usize, &mut Vec<f64>)| {
            f(*slot, v);
            *slot += 1;
        };
        visit(&mut slot, &mut self.stem.weights, f);
        visit(&mut slot, &mut self.stem.bias, f);
        for bi in 0..self.blocks.len() {
            for ui in 0..self.blocks[bi].units.len() {
                let unit = &mut self.blocks[bi].units[ui];
                visit(&mut slot, &mut unit.bn.gamma, f);
                visit(&mut slot, &mut unit.bn.beta, f);
                visit(&mut slot, &mut unit.conv.weights, f);
                visit(&mut slot, &mut unit.conv.bias, f);
            }
            if bi < self.transitions.len() {
                let t = &mut self.transitions[bi];
                visit(&mut slot, &mut t.bn.gamma, f);
                visit(&mut slot, &mut t.bn.beta, f);
                visit(&mut slot, &mut t.conv.weights, f);
                visit(&mut slot, &mut t.conv.bias, f);
            }
        }
        visit(&mut slot, &mut self.head_bn.gamma, f);
        visit(&mut slot, &mut self.head_bn.beta, f);
        visit(&mut slot, &mut self.classifier.weights, f);
        visit(&mut slot, &mut self.classifier.bias, f);
    }

    /// Immutable counterpart of [`Self::for_each_param_mut`], same order.
    pub fn for_each_param(&self, f: &mut dyn FnMut(usize, &[f64])) {
        let mut slot = 0;
        let visit = |slot: &mut usize, v: &[f64], f: &mut dyn FnMut(usize, &[f64])| {
            f(*slot, v);
            *slot += 1;
        };
        visit(&mut slot, &self.stem.weights, f);
        visit(&mut slot, &self.stem.bias, f);
        for bi in 0..self.blocks.len() {
            for ui in 0..self.blocks[bi].units.len() {
                let unit = &self.blocks[bi].units[ui];
                visit(&mut slot, &unit.bn.gamma, f);
                visit(&mut slot, &unit.bn.beta, f);
                visit(&mut slot, &unit.conv.weights, f);
                visit(&mut slot, &unit.conv.bias, f);
            }
            if bi < self.transitions.len() {
                let t = &self.transitions[bi];
                visit(&mut slot, &t.bn.gamma, f);
                visit(&mut slot, &t.bn.beta, f);
                visit(&mut slot, &t.conv.weights, f);
                visit(&mut slot, &t.conv.bias, f);
            }
        }
        visit(&mut slot, &self.head_bn.gamma, f);
        visit(&mut slot, &self.head_bn.beta, f);
        visit(&mut slot, &self.classifier.weights, f);
        visit(&mut slot, &self.classifier.bias, f);
    }

    /// Visit running statistics (mean then var per batch-norm, same BN order
    /// as the parameter visitors).
    pub fn for_each_stat_mut(&mut self, f: &mut dyn FnMut(usize, &mut Vec<f64>)) {
        let mut slot = 0;
        let visit = |slot: &mut usize, v: &mut Vec<f64>, f: &mut dyn FnMut(usize, &mut Vec<f64>)| {
            f(*slot, v);
            *slot += 1;
        };
        for bi in 0..self.blocks.len() {
            for ui in 0..self.blocks[bi].units.len() {
                let unit = &mut self.blocks[bi].units[ui];
                visit(&mut slot, &mut unit.bn.running_mean, f);
                visit(&mut slot, &mut unit.bn.running_var, f);
            }
            if bi < self.transitions.len() {
                let t = &mut self.transitions[bi];
                visit(&mut slot, &mut t.bn.running_mean, f);
                visit(&mut slot, &mut t.bn.running_var, f);
            }
        }
        visit(&mut slot, &mut self.head_bn.running_mean, f);
        visit(&mut slot, &mut self.head_bn.running_var, f);
    }

    pub fn for_each_stat(&self, f: &mut dyn FnMut(usize, &[f64])) {
        let mut slot = 0;
        let visit = |slot: &mut usize, v: &[f64], f: &mut dyn FnMut(usize, &[f64])| {
            f(*slot, v);
            *slot += 1;
        };
        for bi in 0..self.blocks.len() {
            for ui in 0..self.blocks[bi].units.len() {
                let unit = &self.blocks[bi].units[ui];
                visit(&mut slot, &unit.bn.running_mean, f);
                visit(&mut slot, &unit.bn.running_var, f);
            }
            if bi < self.transitions.len() {
                let t = &self.transitions[bi];
                visit(&mut slot, &t.bn.running_mean, f);
                visit(&mut slot, &t.bn.running_var, f);
            }
        }
        visit(&mut slot, &self.head_bn.running_mean, f);
        visit(&mut slot, &self.head_bn.running_var, f);
    }

    pub fn param_slot_count(&self) -> usize {
        let mut count = 0;
        self.for_each_param(&mut |_, _| count += 1);
        count
    }

    fn check_input(&self, x: &Tensor4) -> Result<()> {
        if x.c != self.config.input_channels
            || x.h != self.config.input_rows
            || x.w != self.config.input_cols
        {
            return Err(Error::ShapeMismatch(format!(
                "model expects (n,{},{},{}), got ({},{},{},{})",
                self.config.input_channels,
                self.config.input_rows,
                self.config.input_cols,
                x.n,
                x.c,
                x.h,
                x.w
            )));
        }
        Ok(())
    }

    // -- forward --------------------------------------------------------------

    /// Evaluation-mode logits; batch-norm uses running statistics, nothing
    /// is mutated.
    pub fn forward_eval(&self, x: &Tensor4) -> Result<Tensor4> {
        self.check_input(x)?;
        let mut cur = self.stem.forward(x)?;
        for bi in 0..self.blocks.len() {
            let mut pieces: Vec<Tensor4> = vec![cur];
            for unit in &self.blocks[bi].units {
                let refs: Vec<&Tensor4> = pieces.iter().collect();
                let cat = Tensor4::concat_channels(&refs);
                let bn_out = unit.bn.forward_eval(&cat)?;
                let act = relu_forward(&bn_out);
                pieces.push(unit.conv.forward(&act)?);
            }
            let refs: Vec<&Tensor4> = pieces.iter().collect();
            let block_out = Tensor4::concat_channels(&refs);
            if bi < self.transitions.len() {
                let t = &self.transitions[bi];
                let bn_out = t.bn.forward_eval(&block_out)?;
                let act = relu_forward(&bn_out);
                cur = avgpool2_forward(&t.conv.forward(&act)?);
            } else {
                cur = block_out;
            }
        }
        let bn_out = self.head_bn.forward_eval(&cur)?;
        let act = relu_forward(&bn_out);
        let gap = global_avgpool_forward(&act);
        self.classifier.forward(&gap)
    }

    /// Training-mode logits plus the activation cache for [`Self::backward`].
    pub fn forward_train(&mut self, x: &Tensor4, update_stats: bool) -> Result<(Tensor4, ForwardCache)> {
        self.check_input(x)?;
        let stem_out = self.stem.forward(x)?;
        let mut cache = ForwardCache {
            input: x.clone(),
            blocks: Vec::with_capacity(3),
            transitions: Vec::with_capacity(2),
            head_bn: None,
            head_input: None,
            gap_out: None,
        };

        let mut cur = stem_out;
        for bi in 0..self.blocks.len() {
            let block = &mut self.blocks[bi];
            let mut bcache = BlockCache {
                input: cur,
                unit_bn: Vec::with_capacity(block.units.len()),
                unit_out: Vec::with_capacity(block.units.len()),
            };
            for unit in &mut block.units {
                let cat = {
                    let mut refs: Vec<&Tensor4> = vec![&bcache.input];
                    refs.extend(bcache.unit_out.iter());
                    Tensor4::concat_channels(&refs)
                };
                let (bn_out, bn_cache) = unit.bn.forward_train(&cat, update_stats)?;
                let act = relu_forward(&bn_out);
                let out = unit.conv.forward(&act)?;
                bcache.unit_bn.push(bn_cache);
                bcache.unit_out.push(out);
            }
            let block_out = {
                let mut refs: Vec<&Tensor4> = vec![&bcache.input];
                refs.extend(bcache.unit_out.iter());
                Tensor4::concat_channels(&refs)
            };
            cache.blocks.push(bcache);

            if bi < self.transitions.len() {
                let t = &mut self.transitions[bi];
                let (bn_out, bn_cache) = t.bn.forward_train(&block_out, update_stats)?;
                let act = relu_forward(&bn_out);
                let conv_out = t.conv.forward(&act)?;
                cur = avgpool2_forward(&conv_out);
                cache.transitions.push(TransCache {
                    input: block_out,
                    bn: bn_cache,
                });
            } else {
                let (bn_out, bn_cache) = self.head_bn.forward_train(&block_out, update_stats)?;
                let act = relu_forward(&bn_out);
                let gap = global_avgpool_forward(&act);
                let logits = self.classifier.forward(&gap)?;
                cache.head_bn = Some(bn_cache);
                cache.head_input = Some(block_out);
                cache.gap_out = Some(gap);
                return Ok((logits, cache));
            }
        }
        unreachable!("three blocks always terminate in the head")
    }

    // -- backward ---------------------------------------------------------------

    /// Backpropagate `d_logits` through the cached forward pass. Returns the
    /// gradient with respect to the input and per-slot parameter gradients
    /// in canonical visitor order.
    pub fn backward(&self, cache: &ForwardCache, d_logits: &Tensor4) -> (Tensor4, Vec<Vec<f64>>) {
        let total_slots = self.param_slot_count();
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); total_slots];

        // Slot layout mirrors for_each_param: stem(2), then per block
        // L*(4) + transition(4), head(2), classifier(2).
        let l = self.config.block_layers;
        let unit_slot = |bi: usize, ui: usize| 2 + bi * (l * 4 + 4) + ui * 4;
        let trans_slot = |bi: usize| 2 + bi * (l * 4 + 4) + l * 4;
        let head_slot = total_slots - 4;

        let head_input = cache.head_input.as_ref().expect("cache from forward_train");
        let head_bn_cache = cache.head_bn.as_ref().expect("cache from forward_train");
        let gap_out = cache.gap_out.as_ref().expect("cache from forward_train");

        // Head: classifier -> GAP -> ReLU -> BN.
        let (d_gap, cls_dw, cls_db) = self.classifier.backward(gap_out, d_logits);
        grads[head_slot + 2] = cls_dw;
        grads[head_slot + 3] = cls_db;

        let bn_out = self.head_bn.forward_with_stats(head_input, head_bn_cache);
        let act_shape = bn_out.shape();
        let d_act = global_avgpool_backward(act_shape, &d_gap);
        let d_bn_out = relu_backward(&bn_out, &d_act);
        let (mut d_cur, dgamma, dbeta) = self.head_bn.backward(head_input, head_bn_cache, &d_bn_out);
        grads[head_slot] = dgamma;
        grads[head_slot + 1] = dbeta;

        // Blocks in reverse, with the transition that precedes block bi+1.
        for bi in (0..self.blocks.len()).rev() {
            let bcache = &cache.blocks[bi];
            let block = &self.blocks[bi];
            let k = self.config.growth_rate;
            let c0 = bcache.input.c;

            // d_cur currently holds the gradient of this block's output
            // (c0 + L*k channels): split into per-piece accumulators.
            let mut d_pieces: Vec<Tensor4> = Vec::with_capacity(1 + block.units.len());
            d_pieces.push(d_cur.channel_slice(0, c0));
            for ui in 0..block.units.len() {
                let lo = c0 + ui * k;
                d_pieces.push(d_cur.channel_slice(lo, lo + k));
            }

            for ui in (0..block.units.len()).rev() {
                let unit = &block.units[ui];
                let d_unit_out = d_pieces[ui + 1].clone();

                let cat = {
                    let mut refs: Vec<&Tensor4> = vec![&bcache.input];
                    refs.extend(bcache.unit_out[..ui].iter());
                    Tensor4::concat_channels(&refs)
                };
                let bn_out = unit.bn.forward_with_stats(&cat, &bcache.unit_bn[ui]);
                let act = relu_forward(&bn_out);
                let (d_act, conv_dw, conv_db) = unit.conv.backward(&act, &d_unit_out);
                let d_bn_out = relu_backward(&bn_out, &d_act);
                let (d_cat, dgamma, dbeta) = unit.bn.backward(&cat, &bcache.unit_bn[ui], &d_bn_out);

                let slot = unit_slot(bi, ui);
                grads[slot] = dgamma;
                grads[slot + 1] = dbeta;
                grads[slot + 2] = conv_dw;
                grads[slot + 3] = conv_db;

                // Scatter d_cat back onto the input and earlier unit outputs.
                d_pieces[0].add_into_channels_from(&d_cat, 0, c0);
                for prev in 0..ui {
                    let lo = c0 + prev * k;
                    d_pieces[prev + 1].add_into_channels_from(&d_cat, lo, lo + k);
                }
            }
            let d_block_input = d_pieces.swap_remove(0);

            if bi == 0 {
                // Stem conv closes the chain.
                let (d_input, stem_dw, stem_db) = self.stem.backward(&cache.input, &d_block_input);
                grads[0] = stem_dw;
                grads[1] = stem_db;
                return (d_input, grads);
            }

            // The preceding transition produced this block's input.
            let t = &self.transitions[bi - 1];
            let tcache = &cache.transitions[bi - 1];
            let bn_out = t.bn.forward_with_stats(&tcache.input, &tcache.bn);
            let act = relu_forward(&bn_out);
            let conv_out_shape = {
                let (oh, ow) = t.conv.output_dims(act.h, act.w);
                (act.n, t.conv.out_c, oh, ow)
            };
            let d_conv_out = avgpool2_backward(conv_out_shape, &d_block_input);
            let (d_act, conv_dw, conv_db) = t.conv.backward(&act, &d_conv_out);
            let d_bn_out = relu_backward(&bn_out, &d_act);
            let (d_trans_in, dgamma, dbeta) = t.bn.backward(&tcache.input, &tcache.bn, &d_bn_out);

            let slot = trans_slot(bi - 1);
            grads[slot] = dgamma;
            grads[slot + 1] = dbeta;
            grads[slot + 2] = conv_dw;
            grads[slot + 3] = conv_db;

            d_cur = d_trans_in;
        }
        unreachable!("block 0 returns through the stem")
    }

    // -- prediction -------------------------------------------------------------

    /// Record-level class probabilities: eval-mode forward over all
    /// segments, softmax per segment, arithmetic mean across segments.
    pub fn predict(&self, segments: &[SpectroSegment]) -> Result<[f64; 4]> {
        if segments.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let batch = self.segments_to_tensor(segments)?;
        let logits = self.forward_eval(&batch)?;
        let k = self.config.classes;
        let mut mean = [0.0; 4];
        for b in 0..logits.n {
            let p = softmax_row(&logits.data[b * k..(b + 1) * k]);
            for (m, v) in mean.iter_mut().zip(&p) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= logits.n as f64;
        }
        Ok(mean)
    }

    /// Stack segments into a `(n, 1, rows, cols)` batch.
    pub fn segments_to_tensor(&self, segments: &[SpectroSegment]) -> Result<Tensor4> {
        let rows = self.config.input_rows;
        let cols = self.config.input_cols;
        let mut data = Vec::with_capacity(segments.len() * rows * cols);
        for s in segments {
            if s.width != cols || s.matrix.len() != rows * cols {
                return Err(Error::ShapeMismatch(format!(
                    "segment is {}x{}, model expects {rows}x{cols}",
                    s.matrix.len() / s.width.max(1),
                    s.width
                )));
            }
            data.extend_from_slice(&s.matrix);
        }
        Tensor4::from_vec(segments.len(), 1, rows, cols, data)
    }
}

impl SegmentClassifier for Model {
    fn segment_width(&self) -> usize {
        self.config.input_cols
    }

    fn class_probabilities(&self, segments: &[SpectroSegment]) -> Result<[f64; 4]> {
        self.predict(segments)
    }
}

impl Tensor4 {
    /// Add the channel range `[c_lo, c_hi)` of `src` into self (which has
    /// exactly `c_hi - c_lo` channels).
    fn add_into_channels_from(&mut self, src: &Tensor4, c_lo: usize, c_hi: usize) {
        let plane = self.h * self.w;
        let cs = c_hi - c_lo;
        debug_assert_eq!(self.c, cs);
        for b in 0..self.n {
            let s = (b * src.c + c_lo) * plane;
            let d = b * cs * plane;
            for i in 0..cs * plane {
                self.data[d + i] += src.data[s + i];
            }
        }
    }
}

/// Activations captured by a training forward pass. Dense-block unit inputs
/// are rebuilt from the block input and the small per-unit outputs, so the
/// cache stays linear in the block output size.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Tensor4,
    blocks: Vec<BlockCache>,
    transitions: Vec<TransCache>,
    head_bn: Option<BnCache>,
    head_input: Option<Tensor4>,
    gap_out: Option<Tensor4>,
}

#[derive(Debug, Clone)]
struct BlockCache {
    input: Tensor4,
    unit_bn: Vec<BnCache>,
    unit_out: Vec<Tensor4>,
}

#[derive(Debug, Clone)]
struct TransCache {
    input: Tensor4,
    bn: BnCache,
}
