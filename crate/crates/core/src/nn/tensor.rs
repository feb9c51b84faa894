//! Rank-4 row-major tensor of finite doubles.

use crate::error::Error;
use crate::Result;

/// `(batch, channels, rows, cols)` tensor; lower ranks use size-1 axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self {
            n,
            c,
            h,
            w,
            data: vec![0.0; n * c * h * w],
        }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * c * h * w {
            return Err(Error::ShapeMismatch(format!(
                "{} values for shape ({n},{c},{h},{w})",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite tensor entry".into()));
        }
        Ok(Self { n, c, h, w, data })
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n, self.c, self.h, self.w)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn idx(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        ((b * self.c + c) * self.h + y) * self.w + x
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.idx(b, c, y, x)]
    }

    /// Concatenate along the channel axis; all parts must agree on
    /// `(n, h, w)`.
    pub fn concat_channels(parts: &[&Tensor4]) -> Tensor4 {
        let first = parts[0];
        let total_c: usize = parts.iter().map(|p| p.c).sum();
        debug_assert!(parts
            .iter()
            .all(|p| p.n == first.n && p.h == first.h && p.w == first.w));
        let plane = first.h * first.w;
        let mut out = Tensor4::zeros(first.n, total_c, first.h, first.w);
        for b in 0..first.n {
            let mut c_off = 0;
            for part in parts {
                let src = b * part.c * plane;
                let dst = (b * total_c + c_off) * plane;
                out.data[dst..dst + part.c * plane]
                    .copy_from_slice(&part.data[src..src + part.c * plane]);
                c_off += part.c;
            }
        }
        out
    }

    /// Copy out a channel range `[c_lo, c_hi)`.
    pub fn channel_slice(&self, c_lo: usize, c_hi: usize) -> Tensor4 {
        let plane = self.h * self.w;
        let cs = c_hi - c_lo;
        let mut out = Tensor4::zeros(self.n, cs, self.h, self.w);
        for b in 0..self.n {
            let src = (b * self.c + c_lo) * plane;
            let dst = b * cs * plane;
            out.data[dst..dst + cs * plane].copy_from_slice(&self.data[src..src + cs * plane]);
        }
        out
    }

    /// Add `other` into the channel range `[c_lo, c_lo + other.c)`.
    pub fn add_into_channels(&mut self, c_lo: usize, other: &Tensor4) {
        let plane = self.h * self.w;
        for b in 0..self.n {
            let dst = (b * self.c + c_lo) * plane;
            let src = b * other.c * plane;
            for i in 0..other.c * plane {
                self.data[dst + i] += other.data[src + i];
            }
        }
    }
}
