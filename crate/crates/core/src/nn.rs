//! Layers, parameter storage and optimisation on top of [`crate::autograd`].
//!
//! Sequences are laid out as `[batch * frames, channels]` matrices so that a
//! 1-D convolution is an im2col gather followed by one matrix product.

use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Tensor, Var};
use crate::error::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.2;

/// Flat list of trainable tensors owned by one network.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Params {
    tensors: Vec<Tensor>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, t: Tensor) -> usize {
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Registers every tensor as a differentiable leaf of `g`.
    pub fn bind(&self, g: &mut Graph) -> Vec<Var> {
        self.tensors.iter().map(|t| g.variable(t.clone())).collect()
    }

    /// Registers every tensor as a constant of `g` (inference, frozen nets).
    pub fn bind_frozen(&self, g: &mut Graph) -> Vec<Var> {
        self.tensors.iter().map(|t| g.constant(t.clone())).collect()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    /// Largest absolute elementwise difference to `other`.
    pub fn max_abs_diff(&self, other: &Params) -> f64 {
        self.flat()
            .iter()
            .zip(other.flat())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn uniform_tensor(rng: &mut impl Rng, shape: Vec<usize>, bound: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape, data)
}

/// Fully connected layer `y = x W + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    w: usize,
    b: usize,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(params: &mut Params, rng: &mut impl Rng, in_dim: usize, out_dim: usize) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let w = params.push(uniform_tensor(rng, vec![in_dim, out_dim], bound));
        let b = params.push(uniform_tensor(rng, vec![out_dim], bound));
        Self { w, b, in_dim, out_dim }
    }

    pub fn forward(&self, g: &mut Graph, p: &[Var], x: Var) -> Var {
        let y = g.matmul(x, p[self.w]);
        g.add_bias(y, p[self.b])
    }
}

/// 1-D convolution over time with "same"-style padding `kernel / 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    w: usize,
    b: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl Conv1d {
    pub fn new(
        params: &mut Params,
        rng: &mut impl Rng,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    ) -> Self {
        let fan_in = in_channels * kernel;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w = params.push(uniform_tensor(rng, vec![fan_in, out_channels], bound));
        let b = params.push(uniform_tensor(rng, vec![out_channels], bound));
        Self { w, b, in_channels, out_channels, kernel, stride }
    }

    pub fn out_len(&self, len: usize) -> usize {
        let pad = self.kernel / 2;
        (len + 2 * pad - self.kernel) / self.stride + 1
    }

    /// `x`: `[batch * len, in_channels]` → `[batch * out_len, out_channels]`.
    pub fn forward(&self, g: &mut Graph, p: &[Var], x: Var, batch: usize, len: usize) -> Var {
        let out_len = self.out_len(len);
        let index = im2col_index(batch, len, self.in_channels, self.kernel, self.stride, out_len);
        let cols = g.gather(x, index, vec![batch * out_len, self.kernel * self.in_channels]);
        let y = g.matmul(cols, p[self.w]);
        g.add_bias(y, p[self.b])
    }
}

fn im2col_index(
    batch: usize,
    len: usize,
    channels: usize,
    kernel: usize,
    stride: usize,
    out_len: usize,
) -> Rc<[isize]> {
    let pad = (kernel / 2) as isize;
    let mut index = Vec::with_capacity(batch * out_len * kernel * channels);
    for b in 0..batch {
        for t in 0..out_len {
            for k in 0..kernel {
                let src = (t * stride) as isize + k as isize - pad;
                for c in 0..channels {
                    if src < 0 || src >= len as isize {
                        index.push(-1);
                    } else {
                        index.push(((b * len + src as usize) * channels + c) as isize);
                    }
                }
            }
        }
    }
    index.into()
}

/// Nearest-neighbour ×2 upsampling along time.
pub fn upsample2(g: &mut Graph, x: Var, batch: usize, len: usize, channels: usize) -> Var {
    let mut index = Vec::with_capacity(batch * len * 2 * channels);
    for b in 0..batch {
        for t in 0..2 * len {
            let src = b * len + t / 2;
            for c in 0..channels {
                index.push((src * channels + c) as isize);
            }
        }
    }
    g.gather(x, index.into(), vec![batch * len * 2, channels])
}

/// Concatenates two `[rows, ca]` / `[rows, cb]` matrices along columns.
pub fn concat_cols(g: &mut Graph, a: Var, b: Var) -> Var {
    let (rows, ca) = (g.value(a).rows(), g.value(a).cols());
    let (rows_b, cb) = (g.value(b).rows(), g.value(b).cols());
    assert_eq!(rows, rows_b, "concat_cols: row counts differ");
    let width = ca + cb;
    let ia: Vec<isize> = (0..rows * ca).map(|i| ((i / ca) * width + i % ca) as isize).collect();
    let ib: Vec<isize> =
        (0..rows * cb).map(|i| ((i / cb) * width + ca + i % cb) as isize).collect();
    let sa = g.scatter_add(a, ia.into(), vec![rows, width]);
    let sb = g.scatter_add(b, ib.into(), vec![rows, width]);
    g.add(sa, sb)
}

/// Columns `[start, start + n)` of a `[rows, cols]` matrix.
pub fn slice_cols(g: &mut Graph, x: Var, start: usize, n: usize) -> Var {
    let (rows, cols) = (g.value(x).rows(), g.value(x).cols());
    assert!(start + n <= cols, "slice_cols out of range");
    let index: Vec<isize> = (0..rows * n).map(|i| ((i / n) * cols + start + i % n) as isize).collect();
    g.gather(x, index.into(), vec![rows, n])
}

/// Shape of a strided 1-D convolutional stack.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvArch {
    pub seq_len: usize,
    pub channels: usize,
    pub widths: Vec<usize>,
    pub kernel: usize,
}

impl ConvArch {
    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(Error::Config(
                "conv stack needs at least one layer and an odd kernel".into(),
            ));
        }
        let factor = 1usize << self.widths.len();
        if self.seq_len == 0 || self.seq_len % factor != 0 {
            return Err(Error::Config(format!(
                "sequence length {} must be a multiple of {factor} for {} stride-2 layers",
                self.seq_len,
                self.widths.len()
            )));
        }
        Ok(())
    }

    pub fn bottleneck_len(&self) -> usize {
        self.seq_len >> self.widths.len()
    }
}

/// Stride-2 convolutions, flatten, affine head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvEncoder {
    pub arch: ConvArch,
    pub in_channels: usize,
    convs: Vec<Conv1d>,
    head: Linear,
}

impl ConvEncoder {
    pub fn new(
        params: &mut Params,
        rng: &mut impl Rng,
        arch: &ConvArch,
        in_channels: usize,
        out_dim: usize,
    ) -> Self {
        let mut convs = Vec::with_capacity(arch.widths.len());
        let mut c = in_channels;
        for &w in &arch.widths {
            convs.push(Conv1d::new(params, rng, c, w, arch.kernel, 2));
            c = w;
        }
        let head = Linear::new(params, rng, arch.bottleneck_len() * c, out_dim);
        Self { arch: arch.clone(), in_channels, convs, head }
    }

    pub fn out_dim(&self) -> usize {
        self.head.out_dim
    }

    /// `x`: `[batch * seq_len, in_channels]` → `[batch, out_dim]`.
    pub fn forward(&self, g: &mut Graph, p: &[Var], x: Var, batch: usize) -> Var {
        let mut h = x;
        let mut len = self.arch.seq_len;
        for conv in &self.convs {
            h = conv.forward(g, p, h, batch, len);
            h = g.leaky_relu(h, LEAKY_SLOPE);
            len = conv.out_len(len);
        }
        let width = len * self.convs.last().map_or(self.in_channels, |c| c.out_channels);
        let flat = g.reshape(h, vec![batch, width]);
        self.head.forward(g, p, flat)
    }
}

/// Affine projection to the bottleneck, then mirrored upsample + conv stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvDecoder {
    pub arch: ConvArch,
    pub in_dim: usize,
    head: Linear,
    convs: Vec<Conv1d>,
}

impl ConvDecoder {
    pub fn new(params: &mut Params, rng: &mut impl Rng, arch: &ConvArch, in_dim: usize) -> Self {
        let rev: Vec<usize> = arch.widths.iter().rev().copied().collect();
        let head = Linear::new(params, rng, in_dim, arch.bottleneck_len() * rev[0]);
        let mut convs = Vec::with_capacity(rev.len());
        for i in 0..rev.len() {
            let out = if i + 1 < rev.len() { rev[i + 1] } else { arch.channels };
            convs.push(Conv1d::new(params, rng, rev[i], out, arch.kernel, 1));
        }
        Self { arch: arch.clone(), in_dim, head, convs }
    }

    /// `z`: `[batch, in_dim]` → `[batch * seq_len, channels]` (linear output).
    pub fn forward(&self, g: &mut Graph, p: &[Var], z: Var, batch: usize) -> Var {
        let mut len = self.arch.bottleneck_len();
        let mut width = self.convs[0].in_channels;
        let h = self.head.forward(g, p, z);
        let h = g.leaky_relu(h, LEAKY_SLOPE);
        let mut h = g.reshape(h, vec![batch * len, width]);
        let last = self.convs.len() - 1;
        for (i, conv) in self.convs.iter().enumerate() {
            h = upsample2(g, h, batch, len, width);
            len *= 2;
            h = conv.forward(g, p, h, batch, len);
            if i < last {
                h = g.leaky_relu(h, LEAKY_SLOPE);
            }
            width = conv.out_channels;
        }
        h
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Self { lr, beta1, beta2, eps: 1e-8, step: 0, m: Vec::new(), v: Vec::new() }
    }

    /// Applies one update. `grads[i]` matches `params.tensors()[i]`.
    pub fn step(&mut self, params: &mut Params, grads: &[Tensor]) {
        assert_eq!(params.len(), grads.len(), "adam: gradient count");
        if self.m.is_empty() {
            self.m = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (i, (p, gr)) in params.tensors_mut().iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, (w, &gj)) in p.data_mut().iter_mut().zip(gr.data()).enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                *w -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

/// Computes gradients of `loss` for every bound parameter and copies them out.
pub fn param_grads(g: &mut Graph, loss: Var, bound: &[Var]) -> Vec<Tensor> {
    let grads = g.grad(loss, bound);
    grads.iter().map(|&v| g.value(v).clone()).collect()
}

/// Stacks equally-shaped `[frames, channels]` matrices into one batch matrix.
pub fn stack_rows<'a>(items: impl IntoIterator<Item = &'a [f64]>, channels: usize) -> Tensor {
    let mut data = Vec::new();
    let mut rows = 0;
    for item in items {
        rows += item.len() / channels;
        data.extend_from_slice(item);
    }
    Tensor::new(vec![rows, channels], data)
}
