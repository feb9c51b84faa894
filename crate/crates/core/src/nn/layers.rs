//! Layer forward/backward kernels: convolution, row-wise batch
//! normalization, ReLU, pooling, and the affine classifier head.

use crate::error::Error;
use crate::nn::tensor::Tensor4;
use crate::Result;

/// Output positions `o` with `0 <= o*stride + k_off - pad < in_dim`,
/// clamped to `[0, out_dim)`.
fn valid_range(k_off: usize, pad: usize, stride: usize, in_dim: usize, out_dim: usize) -> (usize, usize) {
    let lo = if pad > k_off {
        (pad - k_off).div_ceil(stride)
    } else {
        0
    };
    let max_num = in_dim as isize - 1 + pad as isize - k_off as isize;
    if max_num < 0 {
        return (0, 0);
    }
    let hi = (max_num as usize / stride + 1).min(out_dim);
    (lo.min(hi), hi)
}

// ---------------------------------------------------------------------------
// Convolution (cross-correlation convention)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Conv2d {
    /// `[out_c][in_c][kh][kw]` row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_c: usize,
    pub out_c: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    pub fn new(in_c: usize, out_c: usize, kh: usize, kw: usize, stride: usize, pad: usize) -> Result<Self> {
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::InvalidInput(format!(
                "kernel must be odd, got {kh}x{kw}"
            )));
        }
        if stride == 0 {
            return Err(Error::InvalidInput("stride must be positive".into()));
        }
        Ok(Self {
            weights: vec![0.0; out_c * in_c * kh * kw],
            bias: vec![0.0; out_c],
            in_c,
            out_c,
            kh,
            kw,
            stride,
            pad,
        })
    }

    pub fn output_dims(&self, h: usize, w: usize) -> (usize, usize) {
        let oh = (h + 2 * self.pad - self.kh) / self.stride + 1;
        let ow = (w + 2 * self.pad - self.kw) / self.stride + 1;
        (oh, ow)
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    #[inline]
    fn weight_index(&self, co: usize, ci: usize, ky: usize, kx: usize) -> usize {
        ((co * self.in_c + ci) * self.kh + ky) * self.kw + kx
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        if x.c != self.in_c {
            return Err(Error::ShapeMismatch(format!(
                "conv expects {} input channels, got {}",
                self.in_c, x.c
            )));
        }
        if x.h + 2 * self.pad < self.kh || x.w + 2 * self.pad < self.kw {
            return Err(Error::ShapeMismatch(format!(
                "input {}x{} too small for {}x{} kernel",
                x.h, x.w, self.kh, self.kw
            )));
        }
        let (oh_dim, ow_dim) = self.output_dims(x.h, x.w);
        let mut y = Tensor4::zeros(x.n, self.out_c, oh_dim, ow_dim);

        for b in 0..x.n {
            for co in 0..self.out_c {
                let bias = self.bias[co];
                let y_base = (b * self.out_c + co) * oh_dim * ow_dim;
                for v in &mut y.data[y_base..y_base + oh_dim * ow_dim] {
                    *v = bias;
                }
                for ci in 0..self.in_c {
                    for ky in 0..self.kh {
                        let (oh_lo, oh_hi) = valid_range(ky, self.pad, self.stride, x.h, oh_dim);
                        for kx in 0..self.kw {
                            let wv = self.weights[self.weight_index(co, ci, ky, kx)];
                            if wv == 0.0 {
                                continue;
                            }
                            let (ow_lo, ow_hi) =
                                valid_range(kx, self.pad, self.stride, x.w, ow_dim);
                            for oh in oh_lo..oh_hi {
                                let iy = oh * self.stride + ky - self.pad;
                                let y_row = y_base + oh * ow_dim;
                                let x_row = ((b * self.in_c + ci) * x.h + iy) * x.w;
                                for ow in ow_lo..ow_hi {
                                    let ix = ow * self.stride + kx - self.pad;
                                    y.data[y_row + ow] += wv * x.data[x_row + ix];
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(y)
    }

    /// Gradients of a loss with respect to input, weights, and bias.
    pub fn backward(&self, x: &Tensor4, dy: &Tensor4) -> (Tensor4, Vec<f64>, Vec<f64>) {
        let (oh_dim, ow_dim) = self.output_dims(x.h, x.w);
        debug_assert_eq!((dy.c, dy.h, dy.w), (self.out_c, oh_dim, ow_dim));

        let mut dx = Tensor4::zeros(x.n, x.c, x.h, x.w);
        let mut dw = vec![0.0; self.weights.len()];
        let mut db = vec![0.0; self.bias.len()];

        for b in 0..x.n {
            for co in 0..self.out_c {
                let dy_base = (b * self.out_c + co) * oh_dim * ow_dim;
                db[co] += dy.data[dy_base..dy_base + oh_dim * ow_dim].iter().sum::<f64>();
                for ci in 0..self.in_c {
                    for ky in 0..self.kh {
                        let (oh_lo, oh_hi) = valid_range(ky, self.pad, self.stride, x.h, oh_dim);
                        for kx in 0..self.kw {
                            let widx = self.weight_index(co, ci, ky, kx);
                            let wv = self.weights[widx];
                            let (ow_lo, ow_hi) =
                                valid_range(kx, self.pad, self.stride, x.w, ow_dim);
                            let mut w_acc = 0.0;
                            for oh in oh_lo..oh_hi {
                                let iy = oh * self.stride + ky - self.pad;
                                let dy_row = dy_base + oh * ow_dim;
                                let x_row = ((b * self.in_c + ci) * x.h + iy) * x.w;
                                for ow in ow_lo..ow_hi {
                                    let ix = ow * self.stride + kx - self.pad;
                                    let g = dy.data[dy_row + ow];
                                    w_acc += g * x.data[x_row + ix];
                                    dx.data[x_row + ix] += g * wv;
                                }
                            }
                            dw[widx] += w_acc;
                        }
                    }
                }
            }
        }
        (dx, dw, db)
    }
}

// ---------------------------------------------------------------------------
// Row-wise batch normalization
// ---------------------------------------------------------------------------

/// Batch normalization with statistics per `(channel, row)` group, computed
/// across the batch and column axes, so each frequency row is normalized
/// independently.
#[derive(Debug, Clone)]
pub struct RowwiseBatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub channels: usize,
    pub rows: usize,
    pub eps: f64,
    pub momentum: f64,
}

/// Batch statistics captured by a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RowwiseBatchNorm {
    pub fn new(channels: usize, rows: usize) -> Self {
        let groups = channels * rows;
        Self {
            gamma: vec![1.0; groups],
            beta: vec![0.0; groups],
            running_mean: vec![0.0; groups],
            running_var: vec![1.0; groups],
            channels,
            rows,
            eps: 1e-5,
            momentum: 0.9,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }

    fn batch_stats(&self, x: &Tensor4) -> BnCache {
        let groups = self.channels * self.rows;
        let m = (x.n * x.w) as f64;
        let mut mean = vec![0.0; groups];
        let mut var = vec![0.0; groups];
        for b in 0..x.n {
            for c in 0..self.channels {
                for r in 0..self.rows {
                    let row = ((b * x.c + c) * x.h + r) * x.w;
                    let g = c * self.rows + r;
                    mean[g] += x.data[row..row + x.w].iter().sum::<f64>();
                }
            }
        }
        for v in &mut mean {
            *v /= m;
        }
        for b in 0..x.n {
            for c in 0..self.channels {
                for r in 0..self.rows {
                    let row = ((b * x.c + c) * x.h + r) * x.w;
                    let g = c * self.rows + r;
                    let mu = mean[g];
                    var[g] += x.data[row..row + x.w]
                        .iter()
                        .map(|&v| (v - mu) * (v - mu))
                        .sum::<f64>();
                }
            }
        }
        for v in &mut var {
            *v /= m;
        }
        BnCache { mean, var }
    }

    fn normalize(&self, x: &Tensor4, mean: &[f64], var: &[f64]) -> Tensor4 {
        let mut y = Tensor4::zeros(x.n, x.c, x.h, x.w);
        for b in 0..x.n {
            for c in 0..self.channels {
                for r in 0..self.rows {
                    let g = c * self.rows + r;
                    let inv_std = 1.0 / (var[g] + self.eps).sqrt();
                    let (gamma, beta, mu) = (self.gamma[g], self.beta[g], mean[g]);
                    let row = ((b * x.c + c) * x.h + r) * x.w;
                    for i in row..row + x.w {
                        y.data[i] = gamma * (x.data[i] - mu) * inv_std + beta;
                    }
                }
            }
        }
        y
    }

    fn check_shape(&self, x: &Tensor4) -> Result<()> {
        if x.c != self.channels || x.h != self.rows {
            return Err(Error::ShapeMismatch(format!(
                "batchnorm over {}x{} groups got input {}x{}",
                self.channels, self.rows, x.c, x.h
            )));
        }
        Ok(())
    }

    /// Training mode: normalize with batch statistics; optionally fold them
    /// into the running statistics (disabled during gradient checking).
    pub fn forward_train(&mut self, x: &Tensor4, update_stats: bool) -> Result<(Tensor4, BnCache)> {
        self.check_shape(x)?;
        let cache = self.batch_stats(x);
        if update_stats {
            for g in 0..cache.mean.len() {
                self.running_mean[g] =
                    self.momentum * self.running_mean[g] + (1.0 - self.momentum) * cache.mean[g];
                self.running_var[g] =
                    self.momentum * self.running_var[g] + (1.0 - self.momentum) * cache.var[g];
            }
        }
        let y = self.normalize(x, &cache.mean, &cache.var);
        Ok((y, cache))
    }

    /// Re-run normalization with previously captured batch statistics
    /// (used to rebuild activations during the backward pass).
    pub fn forward_with_stats(&self, x: &Tensor4, cache: &BnCache) -> Tensor4 {
        self.normalize(x, &cache.mean, &cache.var)
    }

    /// Evaluation mode: running statistics used verbatim.
    pub fn forward_eval(&self, x: &Tensor4) -> Result<Tensor4> {
        self.check_shape(x)?;
        Ok(self.normalize(x, &self.running_mean, &self.running_var))
    }

    /// Standard batch-norm backward per `(channel, row)` group.
    pub fn backward(&self, x: &Tensor4, cache: &BnCache, dy: &Tensor4) -> (Tensor4, Vec<f64>, Vec<f64>) {
        let groups = self.channels * self.rows;
        let m = (x.n * x.w) as f64;
        let mut dgamma = vec![0.0; groups];
        let mut dbeta = vec![0.0; groups];
        let mut sum_dy = vec![0.0; groups];
        let mut sum_dy_xhat = vec![0.0; groups];

        for b in 0..x.n {
            for c in 0..self.channels {
                for r in 0..self.rows {
                    let g = c * self.rows + r;
                    let inv_std = 1.0 / (cache.var[g] + self.eps).sqrt();
                    let mu = cache.mean[g];
                    let row = ((b * x.c + c) * x.h + r) * x.w;
                    for i in row..row + x.w {
                        let xhat = (x.data[i] - mu) * inv_std;
                        let g_dy = dy.data[i];
                        dbeta[g] += g_dy;
                        dgamma[g] += g_dy * xhat;
                        sum_dy[g] += g_dy;
                        sum_dy_xhat[g] += g_dy * xhat;
                    }
                }
            }
        }

        let mut dx = Tensor4::zeros(x.n, x.c, x.h, x.w);
        for b in 0..x.n {
            for c in 0..self.channels {
                for r in 0..self.rows {
                    let g = c * self.rows + r;
                    let inv_std = 1.0 / (cache.var[g] + self.eps).sqrt();
                    let mu = cache.mean[g];
                    let scale = self.gamma[g] * inv_std;
                    let mean_dy = sum_dy[g] / m;
                    let mean_dy_xhat = sum_dy_xhat[g] / m;
                    let row = ((b * x.c + c) * x.h + r) * x.w;
                    for i in row..row + x.w {
                        let xhat = (x.data[i] - mu) * inv_std;
                        dx.data[i] = scale * (dy.data[i] - mean_dy - xhat * mean_dy_xhat);
                    }
                }
            }
        }
        (dx, dgamma, dbeta)
    }
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

pub fn relu_forward(x: &Tensor4) -> Tensor4 {
    let mut y = x.clone();
    for v in &mut y.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    y
}

/// `pre` is the pre-activation input (gradient flows where it is positive).
pub fn relu_backward(pre: &Tensor4, dy: &Tensor4) -> Tensor4 {
    let mut dx = dy.clone();
    for (d, &p) in dx.data.iter_mut().zip(&pre.data) {
        if p <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

/// 2x2 average pooling with stride 2; trailing odd rows/columns are dropped.
pub fn avgpool2_forward(x: &Tensor4) -> Tensor4 {
    let oh = x.h / 2;
    let ow = x.w / 2;
    let mut y = Tensor4::zeros(x.n, x.c, oh, ow);
    for b in 0..x.n {
        for c in 0..x.c {
            for r in 0..oh {
                for q in 0..ow {
                    let sum = x.at(b, c, 2 * r, 2 * q)
                        + x.at(b, c, 2 * r, 2 * q + 1)
                        + x.at(b, c, 2 * r + 1, 2 * q)
                        + x.at(b, c, 2 * r + 1, 2 * q + 1);
                    let at = y.idx(b, c, r, q);
                    y.data[at] = sum / 4.0;
                }
            }
        }
    }
    y
}

pub fn avgpool2_backward(input_shape: (usize, usize, usize, usize), dy: &Tensor4) -> Tensor4 {
    let (n, c, h, w) = input_shape;
    let mut dx = Tensor4::zeros(n, c, h, w);
    for b in 0..n {
        for ch in 0..c {
            for r in 0..dy.h {
                for q in 0..dy.w {
                    let g = dy.at(b, ch, r, q) / 4.0;
                    for (ddy, ddx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        let i = dx.idx(b, ch, 2 * r + ddy, 2 * q + ddx);
                        dx.data[i] += g;
                    }
                }
            }
        }
    }
    dx
}

/// Mean over the spatial axes: `(n, c, h, w) -> (n, c, 1, 1)`.
pub fn global_avgpool_forward(x: &Tensor4) -> Tensor4 {
    let plane = (x.h * x.w) as f64;
    let mut y = Tensor4::zeros(x.n, x.c, 1, 1);
    for b in 0..x.n {
        for c in 0..x.c {
            let row = (b * x.c + c) * x.h * x.w;
            y.data[b * x.c + c] = x.data[row..row + x.h * x.w].iter().sum::<f64>() / plane;
        }
    }
    y
}

pub fn global_avgpool_backward(input_shape: (usize, usize, usize, usize), dy: &Tensor4) -> Tensor4 {
    let (n, c, h, w) = input_shape;
    let plane = (h * w) as f64;
    let mut dx = Tensor4::zeros(n, c, h, w);
    for b in 0..n {
        for ch in 0..c {
            let g = dy.data[b * c + ch] / plane;
            let row = (b * c + ch) * h * w;
            for v in &mut dx.data[row..row + h * w] {
                *v = g;
            }
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// Affine head
// ---------------------------------------------------------------------------

/// Fully connected layer over `(n, in_dim, 1, 1)` tensors.
#[derive(Debug, Clone)]
pub struct Affine {
    /// `[out_dim][in_dim]` row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Affine {
    pub fn new(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weights: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        if x.c != self.in_dim || x.h != 1 || x.w != 1 {
            return Err(Error::ShapeMismatch(format!(
                "affine expects (n,{},1,1), got ({},{},{},{})",
                self.in_dim, x.n, x.c, x.h, x.w
            )));
        }
        let mut y = Tensor4::zeros(x.n, self.out_dim, 1, 1);
        for b in 0..x.n {
            for o in 0..self.out_dim {
                let mut acc = self.bias[o];
                let w_row = o * self.in_dim;
                let x_row = b * self.in_dim;
                for i in 0..self.in_dim {
                    acc += self.weights[w_row + i] * x.data[x_row + i];
                }
                y.data[b * self.out_dim + o] = acc;
            }
        }
        Ok(y)
    }

    pub fn backward(&self, x: &Tensor4, dy: &Tensor4) -> (Tensor4, Vec<f64>, Vec<f64>) {
        let mut dx = Tensor4::zeros(x.n, x.c, 1, 1);
        let mut dw = vec![0.0; self.weights.len()];
        let mut db = vec![0.0; self.bias.len()];
        for b in 0..x.n {
            for o in 0..self.out_dim {
                let g = dy.data[b * self.out_dim + o];
                db[o] += g;
                let w_row = o * self.in_dim;
                let x_row = b * self.in_dim;
                for i in 0..self.in_dim {
                    dw[w_row + i] += g * x.data[x_row + i];
                    dx.data[x_row + i] += g * self.weights[w_row + i];
                }
            }
        }
        (dx, dw, db)
    }
}
