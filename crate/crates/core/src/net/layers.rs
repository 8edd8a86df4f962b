//! Network layers with explicit forward and backward passes, generic over the
//! scalar type: f32 for training (and the f32 weight files), f64 for the
//! finite-difference gradient checks.

use crate::error::{Error, Result};
use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

/// Scalar abstraction shared by the network and loss code.
pub trait Real:
    num_traits::Float + AddAssign + SubAssign + MulAssign + Sum + Default + Debug + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn from_f32v(v: f32) -> Self;
    fn to_f32v(self) -> f32;
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn from_f32v(v: f32) -> Self {
        v
    }
    fn to_f32v(self) -> f32 {
        self
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn from_f32v(v: f32) -> Self {
        v as f64
    }
    fn to_f32v(self) -> f32 {
        self as f32
    }
}

/// 2D convolution over a CHW tensor, weights laid out `[out_c][in_c * k * k]`.
#[derive(Debug, Clone)]
pub struct Conv<T> {
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Conv<T> {
    pub fn new(
        in_c: usize,
        in_h: usize,
        in_w: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Result<Conv<T>> {
        if in_h + 2 * pad < k || in_w + 2 * pad < k {
            return Err(Error::Config(format!(
                "conv kernel {k} larger than padded input {in_h}x{in_w}+{pad}"
            )));
        }
        let out_h = (in_h + 2 * pad - k) / stride + 1;
        let out_w = (in_w + 2 * pad - k) / stride + 1;
        Ok(Conv {
            in_c,
            in_h,
            in_w,
            out_c,
            k,
            stride,
            pad,
            out_h,
            out_w,
            weights: vec![T::zero(); out_c * in_c * k * k],
            bias: vec![T::zero(); out_c],
        })
    }

    pub fn in_len(&self) -> usize {
        self.in_c * self.in_h * self.in_w
    }

    pub fn out_len(&self) -> usize {
        self.out_c * self.out_h * self.out_w
    }

    fn kdim(&self) -> usize {
        self.in_c * self.k * self.k
    }

    /// Unrolls receptive fields into a `[kdim][out_pixels]` matrix so the
    /// convolution becomes row-times-matrix products with contiguous inner loops.
    fn im2col(&self, input: &[T]) -> Vec<T> {
        let npix = self.out_h * self.out_w;
        let mut col = vec![T::zero(); self.kdim() * npix];
        for ic in 0..self.in_c {
            let plane = &input[ic * self.in_h * self.in_w..(ic + 1) * self.in_h * self.in_w];
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let krow = ((ic * self.k + ky) * self.k + kx) * npix;
                    for oy in 0..self.out_h {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.in_h as isize {
                            continue;
                        }
                        let src = iy as usize * self.in_w;
                        let dst = krow + oy * self.out_w;
                        for ox in 0..self.out_w {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix < 0 || ix >= self.in_w as isize {
                                continue;
                            }
                            col[dst + ox] = plane[src + ix as usize];
                        }
                    }
                }
            }
        }
        col
    }

    pub fn forward(&self, input: &[T]) -> (Vec<T>, Vec<T>) {
        debug_assert_eq!(input.len(), self.in_len());
        let npix = self.out_h * self.out_w;
        let kdim = self.kdim();
        let col = self.im2col(input);
        let mut out = vec![T::zero(); self.out_c * npix];
        for oc in 0..self.out_c {
            let row = &mut out[oc * npix..(oc + 1) * npix];
            let b = self.bias[oc];
            for v in row.iter_mut() {
                *v = b;
            }
            let wrow = &self.weights[oc * kdim..(oc + 1) * kdim];
            for (kidx, &w) in wrow.iter().enumerate() {
                let crow = &col[kidx * npix..(kidx + 1) * npix];
                for (o, &c) in row.iter_mut().zip(crow) {
                    *o += w * c;
                }
            }
        }
        (out, col)
    }

    /// Returns (grad_weights, grad_bias, grad_input).
    pub fn backward(&self, col: &[T], grad_out: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        let npix = self.out_h * self.out_w;
        let kdim = self.kdim();
        let mut gw = vec![T::zero(); self.weights.len()];
        let mut gb = vec![T::zero(); self.out_c];
        let mut gcol = vec![T::zero(); kdim * npix];

        for oc in 0..self.out_c {
            let grow = &grad_out[oc * npix..(oc + 1) * npix];
            let mut acc = T::zero();
            for &g in grow {
                acc += g;
            }
            gb[oc] = acc;
            let wrow = &self.weights[oc * kdim..(oc + 1) * kdim];
            let gwrow = &mut gw[oc * kdim..(oc + 1) * kdim];
            for kidx in 0..kdim {
                let crow = &col[kidx * npix..(kidx + 1) * npix];
                let mut dot = T::zero();
                for (&g, &c) in grow.iter().zip(crow) {
                    dot += g * c;
                }
                gwrow[kidx] = dot;
                let w = wrow[kidx];
                let gcrow = &mut gcol[kidx * npix..(kidx + 1) * npix];
                for (gc, &g) in gcrow.iter_mut().zip(grow) {
                    *gc += w * g;
                }
            }
        }

        // col2im: scatter the column gradients back onto the input grid.
        let mut gin = vec![T::zero(); self.in_len()];
        for ic in 0..self.in_c {
            let plane = &mut gin[ic * self.in_h * self.in_w..(ic + 1) * self.in_h * self.in_w];
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let krow = ((ic * self.k + ky) * self.k + kx) * npix;
                    for oy in 0..self.out_h {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.in_h as isize {
                            continue;
                        }
                        let dst = iy as usize * self.in_w;
                        let src = krow + oy * self.out_w;
                        for ox in 0..self.out_w {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix < 0 || ix >= self.in_w as isize {
                                continue;
                            }
                            plane[dst + ix as usize] += gcol[src + ox];
                        }
                    }
                }
            }
        }
        (gw, gb, gin)
    }
}

/// 2D max pooling; the backward pass routes gradients to the cached argmax.
#[derive(Debug, Clone)]
pub struct MaxPool {
    pub channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub size: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl MaxPool {
    pub fn new(channels: usize, in_h: usize, in_w: usize, size: usize) -> MaxPool {
        MaxPool { channels, in_h, in_w, size, out_h: in_h / size, out_w: in_w / size }
    }

    pub fn in_len(&self) -> usize {
        self.channels * self.in_h * self.in_w
    }

    pub fn out_len(&self) -> usize {
        self.channels * self.out_h * self.out_w
    }

    pub fn forward<T: Real>(&self, input: &[T]) -> (Vec<T>, Vec<u32>) {
        let mut out = vec![T::zero(); self.out_len()];
        let mut argmax = vec![0u32; self.out_len()];
        for c in 0..self.channels {
            let plane = c * self.in_h * self.in_w;
            for oy in 0..self.out_h {
                for ox in 0..self.out_w {
                    let mut best = T::neg_infinity();
                    let mut best_idx = 0usize;
                    for dy in 0..self.size {
                        for dx in 0..self.size {
                            let idx = plane
                                + (oy * self.size + dy) * self.in_w
                                + (ox * self.size + dx);
                            if input[idx] > best {
                                best = input[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let oidx = c * self.out_h * self.out_w + oy * self.out_w + ox;
                    out[oidx] = best;
                    argmax[oidx] = best_idx as u32;
                }
            }
        }
        (out, argmax)
    }

    pub fn backward<T: Real>(&self, argmax: &[u32], grad_out: &[T]) -> Vec<T> {
        let mut gin = vec![T::zero(); self.in_len()];
        for (g, &idx) in grad_out.iter().zip(argmax) {
            gin[idx as usize] += *g;
        }
        gin
    }
}

/// Rectifier; the subgradient at exactly zero is zero.
#[derive(Debug, Clone)]
pub struct Relu {
    pub len: usize,
}

impl Relu {
    pub fn forward<T: Real>(&self, input: &[T]) -> (Vec<T>, Vec<bool>) {
        let mut out = vec![T::zero(); input.len()];
        let mut mask = vec![false; input.len()];
        for i in 0..input.len() {
            if input[i] > T::zero() {
                out[i] = input[i];
                mask[i] = true;
            }
        }
        (out, mask)
    }

    pub fn backward<T: Real>(&self, mask: &[bool], grad_out: &[T]) -> Vec<T> {
        grad_out.iter().zip(mask).map(|(&g, &m)| if m { g } else { T::zero() }).collect()
    }
}

/// Fully connected layer, weights laid out `[out][in]`.
#[derive(Debug, Clone)]
pub struct Fc<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Fc<T> {
    pub fn new(in_dim: usize, out_dim: usize) -> Fc<T> {
        Fc { in_dim, out_dim, weights: vec![T::zero(); out_dim * in_dim], bias: vec![T::zero(); out_dim] }
    }

    pub fn forward(&self, input: &[T]) -> Vec<T> {
        debug_assert_eq!(input.len(), self.in_dim);
        let mut out = vec![T::zero(); self.out_dim];
        for (o, out_v) in out.iter_mut().enumerate() {
            let wrow = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.bias[o];
            for (&w, &x) in wrow.iter().zip(input) {
                acc += w * x;
            }
            *out_v = acc;
        }
        out
    }

    /// Returns (grad_weights, grad_bias, grad_input).
    pub fn backward(&self, input: &[T], grad_out: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        let mut gw = vec![T::zero(); self.weights.len()];
        let mut gin = vec![T::zero(); self.in_dim];
        for o in 0..self.out_dim {
            let g = grad_out[o];
            let wrow = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let gwrow = &mut gw[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                gwrow[i] = g * input[i];
                gin[i] += wrow[i] * g;
            }
        }
        (gw, gb_from(grad_out), gin)
    }
}

fn gb_from<T: Real>(grad_out: &[T]) -> Vec<T> {
    grad_out.to_vec()
}

/// One trunk stage.
#[derive(Debug, Clone)]
pub enum Layer<T> {
    Conv(Conv<T>),
    Pool(MaxPool),
    Relu(Relu),
    Fc(Fc<T>),
}

/// Per-layer forward state needed by the backward pass.
#[derive(Debug, Clone)]
pub enum LayerCache<T> {
    Conv { col: Vec<T> },
    Pool { argmax: Vec<u32> },
    Relu { mask: Vec<bool> },
    Fc { input: Vec<T> },
}

impl<T: Real> Layer<T> {
    pub fn in_len(&self) -> usize {
        match self {
            Layer::Conv(c) => c.in_len(),
            Layer::Pool(p) => p.in_len(),
            Layer::Relu(r) => r.len,
            Layer::Fc(f) => f.in_dim,
        }
    }

    pub fn out_len(&self) -> usize {
        match self {
            Layer::Conv(c) => c.out_len(),
            Layer::Pool(p) => p.out_len(),
            Layer::Relu(r) => r.len,
            Layer::Fc(f) => f.out_dim,
        }
    }

    pub fn forward(&self, input: &[T]) -> (Vec<T>, LayerCache<T>) {
        match self {
            Layer::Conv(c) => {
                let (out, col) = c.forward(input);
                (out, LayerCache::Conv { col })
            }
            Layer::Pool(p) => {
                let (out, argmax) = p.forward(input);
                (out, LayerCache::Pool { argmax })
            }
            Layer::Relu(r) => {
                let (out, mask) = r.forward(input);
                (out, LayerCache::Relu { mask })
            }
            Layer::Fc(f) => {
                let out = f.forward(input);
                (out, LayerCache::Fc { input: input.to_vec() })
            }
        }
    }

    /// Returns (grad_input, parameter gradients when the layer has any).
    pub fn backward(
        &self,
        cache: &LayerCache<T>,
        grad_out: &[T],
    ) -> (Vec<T>, Option<(Vec<T>, Vec<T>)>) {
        match (self, cache) {
            (Layer::Conv(c), LayerCache::Conv { col }) => {
                let (gw, gb, gin) = c.backward(col, grad_out);
                (gin, Some((gw, gb)))
            }
            (Layer::Pool(p), LayerCache::Pool { argmax }) => (p.backward(argmax, grad_out), None),
            (Layer::Relu(r), LayerCache::Relu { mask }) => (r.backward(mask, grad_out), None),
            (Layer::Fc(f), LayerCache::Fc { input }) => {
                let (gw, gb, gin) = f.backward(input, grad_out);
                (gin, Some((gw, gb)))
            }
            _ => panic!("layer cache mismatch: backward called with a stale cache"),
        }
    }

    pub fn params(&self) -> Option<(&[T], &[T])> {
        match self {
            Layer::Conv(c) => Some((&c.weights, &c.bias)),
            Layer::Fc(f) => Some((&f.weights, &f.bias)),
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<(&mut Vec<T>, &mut Vec<T>)> {
        match self {
            Layer::Conv(c) => Some((&mut c.weights, &mut c.bias)),
            Layer::Fc(f) => Some((&mut f.weights, &mut f.bias)),
            _ => None,
        }
    }

    /// Fan-in used for the uniform initialization bound.
    pub fn fan_in(&self) -> Option<usize> {
        match self {
            Layer::Conv(c) => Some(c.in_c * c.k * c.k),
            Layer::Fc(f) => Some(f.in_dim),
            _ => None,
        }
    }
}
