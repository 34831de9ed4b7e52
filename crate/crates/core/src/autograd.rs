//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Every backward rule is itself expressed with graph operations, so the
//! gradients returned by [`Graph::grad`] are ordinary nodes that can be
//! differentiated again. The gradient penalty of the adversarial trainer
//! depends on this (it differentiates an input-gradient norm with respect to
//! the critic parameters).
//!
//! Tensors are row-major; matrix operations treat a tensor as
//! `[rows, cols]` using its first dimension and the product of the rest.

use std::rc::Rc;

use serde::{Deserialize, Serialize};

/// Dense row-major tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor data does not match shape {shape:?}"
        );
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }

    pub fn full(shape: Vec<usize>, value: f64) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![value; n] }
    }

    pub fn scalar(value: f64) -> Self {
        Self { shape: vec![1], data: vec![value] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Leading dimension.
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Product of the trailing dimensions.
    pub fn cols(&self) -> usize {
        if self.shape.is_empty() {
            1
        } else {
            self.shape[1..].iter().product()
        }
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on a non-scalar tensor");
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    AddBias(Var, Var),
    SumRows(Var),
    BroadcastRows(Var),
    Sum(Var),
    Expand(Var),
    Gather { x: Var, index: Rc<[isize]> },
    ScatterAdd { x: Var, index: Rc<[isize]> },
    Reshape(Var),
    LeakyRelu(Var, f64),
    Tanh(Var),
    Exp(Var),
    Ln(Var),
    Recip(Var),
    Sqrt(Var),
    Sigmoid(Var),
    Softplus(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// A tape of tensor operations. Build one per forward pass and drop it after
/// the parameter update.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Leaf that never receives gradients.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Leaf that gradients can be taken with respect to.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) {
        assert_eq!(self.shape(a), self.shape(b), "{what}: shape mismatch");
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let src = &self.nodes[x.0].value;
        let value = Tensor::new(src.shape.clone(), src.data.iter().map(|&v| f(v)).collect());
        let ng = self.ng(x);
        self.push(value, op, ng)
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let data = va.data.iter().zip(&vb.data).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(va.shape.clone(), data);
        let ng = self.ng(a) || self.ng(b);
        self.push(value, op, ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.same_shape(a, b, "add");
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.same_shape(a, b, "sub");
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.same_shape(a, b, "mul");
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, Op::Scale(x, c), |v| v * c)
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, Op::AddScalar(x), |v| v + c)
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.mul(x, x)
    }

    /// `op(a) · op(b)` where `op` optionally transposes its 2-D argument.
    pub fn matmul_t(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Var {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (ar, ac) = (va.rows(), va.cols());
        let (br, bc) = (vb.rows(), vb.cols());
        let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
        let (k2, n) = if tb { (bc, br) } else { (br, bc) };
        assert_eq!(k, k2, "matmul: inner dimensions {k} and {k2} differ");
        let mut out = vec![0.0; m * n];
        let (rsa, csa) = if ta { (1, ac as isize) } else { (ac as isize, 1) };
        let (rsb, csb) = if tb { (1, bc as isize) } else { (bc as isize, 1) };
        if m > 0 && n > 0 && k > 0 {
            // SAFETY: strides describe in-bounds views of `va`, `vb` and `out`
            // for the (m, k) x (k, n) -> (m, n) product.
            unsafe {
                matrixmultiply::dgemm(
                    m,
                    k,
                    n,
                    1.0,
                    va.data.as_ptr(),
                    rsa,
                    csa,
                    vb.data.as_ptr(),
                    rsb,
                    csb,
                    0.0,
                    out.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        }
        let ng = self.ng(a) || self.ng(b);
        self.push(Tensor::new(vec![m, n], out), Op::MatMul { a, b, ta, tb }, ng)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.matmul_t(a, b, false, false)
    }

    /// Adds a length-`cols` bias to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Var {
        let (vx, vb) = (&self.nodes[x.0].value, &self.nodes[bias.0].value);
        let cols = vx.cols();
        assert_eq!(vb.len(), cols, "add_bias: bias length");
        let mut data = vx.data.clone();
        for row in data.chunks_mut(cols) {
            for (d, b) in row.iter_mut().zip(&vb.data) {
                *d += b;
            }
        }
        let value = Tensor::new(vx.shape.clone(), data);
        let ng = self.ng(x) || self.ng(bias);
        self.push(value, Op::AddBias(x, bias), ng)
    }

    /// Column sums: `[rows, cols] -> [cols]`.
    pub fn sum_rows(&mut self, x: Var) -> Var {
        let vx = &self.nodes[x.0].value;
        let cols = vx.cols();
        let mut out = vec![0.0; cols];
        for row in vx.data.chunks(cols) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        let ng = self.ng(x);
        self.push(Tensor::new(vec![cols], out), Op::SumRows(x), ng)
    }

    /// Repeats a `[cols]` vector into `[rows, cols]`.
    pub fn broadcast_rows(&mut self, x: Var, rows: usize) -> Var {
        let vx = &self.nodes[x.0].value;
        let cols = vx.len();
        let mut out = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            out.extend_from_slice(&vx.data);
        }
        let ng = self.ng(x);
        self.push(Tensor::new(vec![rows, cols], out), Op::BroadcastRows(x), ng)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.nodes[x.0].value.data.iter().sum();
        let ng = self.ng(x);
        self.push(Tensor::scalar(s), Op::Sum(x), ng)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.nodes[x.0].value.len() as f64;
        let s = self.sum(x);
        self.scale(s, 1.0 / n)
    }

    /// Expands a one-element tensor to `shape`.
    pub fn expand(&mut self, x: Var, shape: Vec<usize>) -> Var {
        let v = self.nodes[x.0].value.item();
        let ng = self.ng(x);
        self.push(Tensor::full(shape, v), Op::Expand(x), ng)
    }

    /// `out[i] = x[index[i]]`, or 0 where `index[i] < 0`.
    pub fn gather(&mut self, x: Var, index: Rc<[isize]>, shape: Vec<usize>) -> Var {
        assert_eq!(shape.iter().product::<usize>(), index.len(), "gather: index/shape");
        let src = &self.nodes[x.0].value.data;
        let data = index
            .iter()
            .map(|&i| if i < 0 { 0.0 } else { src[i as usize] })
            .collect();
        let ng = self.ng(x);
        self.push(Tensor::new(shape, data), Op::Gather { x, index }, ng)
    }

    /// `out[index[i]] += x[i]` into a zero tensor of `shape`; negative indices
    /// are dropped. Adjoint of [`Graph::gather`].
    pub fn scatter_add(&mut self, x: Var, index: Rc<[isize]>, shape: Vec<usize>) -> Var {
        let src = &self.nodes[x.0].value.data;
        assert_eq!(src.len(), index.len(), "scatter_add: index length");
        let mut out = vec![0.0; shape.iter().product()];
        for (&i, &v) in index.iter().zip(src.iter()) {
            if i >= 0 {
                out[i as usize] += v;
            }
        }
        let ng = self.ng(x);
        self.push(Tensor::new(shape, out), Op::ScatterAdd { x, index }, ng)
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Var {
        let vx = &self.nodes[x.0].value;
        let value = Tensor::new(shape, vx.data.clone());
        let ng = self.ng(x);
        self.push(value, Op::Reshape(x), ng)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.unary(x, Op::LeakyRelu(x, slope), |v| if v > 0.0 { v } else { slope * v })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), f64::tanh)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, Op::Exp(x), f64::exp)
    }

    pub fn ln(&mut self, x: Var) -> Var {
        self.unary(x, Op::Ln(x), f64::ln)
    }

    pub fn recip(&mut self, x: Var) -> Var {
        self.unary(x, Op::Recip(x), |v| 1.0 / v)
    }

    pub fn sqrt(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sqrt(x), f64::sqrt)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sigmoid(x), sigmoid)
    }

    /// `ln(1 + e^x)`, evaluated stably.
    pub fn softplus(&mut self, x: Var) -> Var {
        self.unary(x, Op::Softplus(x), softplus)
    }

    /// Row-wise sums `[rows, cols] -> [rows, 1]`.
    pub fn row_sums(&mut self, x: Var) -> Var {
        let cols = self.nodes[x.0].value.cols();
        let ones = self.constant(Tensor::full(vec![cols, 1], 1.0));
        self.matmul(x, ones)
    }

    /// Repeats a `[rows, 1]` column into `[rows, cols]`.
    pub fn broadcast_cols(&mut self, x: Var, cols: usize) -> Var {
        let ones = self.constant(Tensor::full(vec![1, cols], 1.0));
        self.matmul(x, ones)
    }

    /// Gradients of the scalar `output` with respect to each of `wrt`.
    ///
    /// The returned nodes live on this graph and can be differentiated
    /// again. Inputs that `output` does not depend on receive zeros.
    pub fn grad(&mut self, output: Var, wrt: &[Var]) -> Vec<Var> {
        assert_eq!(self.value(output).len(), 1, "grad: output must be a scalar");
        let end = output.0 + 1;

        // Only propagate along paths that reach one of `wrt`.
        let mut relevant = vec![false; end];
        for w in wrt {
            if w.0 < end {
                relevant[w.0] = true;
            }
        }
        for id in 0..end {
            if relevant[id] {
                continue;
            }
            relevant[id] = op_inputs(&self.nodes[id].op)
                .into_iter()
                .any(|v| relevant[v.0]);
        }

        let mut grads: Vec<Option<Var>> = vec![None; end];
        grads[output.0] = Some(self.constant(Tensor::full(self.shape(output).to_vec(), 1.0)));

        for id in (0..end).rev() {
            let Some(gy) = grads[id] else { continue };
            if !relevant[id] {
                continue;
            }
            let op = self.nodes[id].op.clone();
            let y = Var(id);
            let contributions = self.backward_rule(&op, y, gy, &relevant);
            for (input, g) in contributions {
                if input.0 >= end || !relevant[input.0] {
                    continue;
                }
                grads[input.0] = Some(match grads[input.0] {
                    Some(prev) => self.add(prev, g),
                    None => g,
                });
            }
        }

        wrt.iter()
            .map(|w| match grads.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let shape = self.shape(*w).to_vec();
                    self.constant(Tensor::zeros(shape))
                }
            })
            .collect()
    }

    fn backward_rule(&mut self, op: &Op, y: Var, gy: Var, relevant: &[bool]) -> Vec<(Var, Var)> {
        let want = |v: Var| relevant[v.0];
        let mut out = Vec::with_capacity(2);
        match *op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if want(a) {
                    out.push((a, gy));
                }
                if want(b) {
                    out.push((b, gy));
                }
            }
            Op::Sub(a, b) => {
                if want(a) {
                    out.push((a, gy));
                }
                if want(b) {
                    let g = self.scale(gy, -1.0);
                    out.push((b, g));
                }
            }
            Op::Mul(a, b) => {
                if want(a) {
                    let g = self.mul(gy, b);
                    out.push((a, g));
                }
                if want(b) {
                    let g = self.mul(gy, a);
                    out.push((b, g));
                }
            }
            Op::Scale(x, c) => {
                let g = self.scale(gy, c);
                out.push((x, g));
            }
            Op::AddScalar(x) => out.push((x, gy)),
            Op::MatMul { a, b, ta, tb } => {
                if want(a) {
                    let g = if ta {
                        self.matmul_t(b, gy, tb, true)
                    } else {
                        self.matmul_t(gy, b, false, !tb)
                    };
                    let g = self.reshape(g, self.shape(a).to_vec());
                    out.push((a, g));
                }
                if want(b) {
                    let g = if tb {
                        self.matmul_t(gy, a, true, ta)
                    } else {
                        self.matmul_t(a, gy, !ta, false)
                    };
                    let g = self.reshape(g, self.shape(b).to_vec());
                    out.push((b, g));
                }
            }
            Op::AddBias(x, b) => {
                if want(x) {
                    out.push((x, gy));
                }
                if want(b) {
                    let g = self.sum_rows(gy);
                    let g = self.reshape(g, self.shape(b).to_vec());
                    out.push((b, g));
                }
            }
            Op::SumRows(x) => {
                let rows = self.value(x).rows();
                let g = self.broadcast_rows(gy, rows);
                let g = self.reshape(g, self.shape(x).to_vec());
                out.push((x, g));
            }
            Op::BroadcastRows(x) => {
                let g = self.sum_rows(gy);
                let g = self.reshape(g, self.shape(x).to_vec());
                out.push((x, g));
            }
            Op::Sum(x) => {
                let g = self.expand(gy, self.shape(x).to_vec());
                out.push((x, g));
            }
            Op::Expand(x) => {
                let g = self.sum(gy);
                let g = self.reshape(g, self.shape(x).to_vec());
                out.push((x, g));
            }
            Op::Gather { x, ref index } => {
                let g = self.scatter_add(gy, index.clone(), self.shape(x).to_vec());
                out.push((x, g));
            }
            Op::ScatterAdd { x, ref index } => {
                let g = self.gather(gy, index.clone(), self.shape(x).to_vec());
                out.push((x, g));
            }
            Op::Reshape(x) => {
                let g = self.reshape(gy, self.shape(x).to_vec());
                out.push((x, g));
            }
            Op::LeakyRelu(x, slope) => {
                let v = self.value(x);
                let mask = Tensor::new(
                    v.shape.clone(),
                    v.data.iter().map(|&e| if e > 0.0 { 1.0 } else { slope }).collect(),
                );
                let m = self.constant(mask);
                let g = self.mul(gy, m);
                out.push((x, g));
            }
            Op::Tanh(x) => {
                // 1 - y^2
                let y2 = self.square(y);
                let d = self.scale(y2, -1.0);
                let d = self.add_scalar(d, 1.0);
                let g = self.mul(gy, d);
                out.push((x, g));
            }
            Op::Exp(x) => {
                let g = self.mul(gy, y);
                out.push((x, g));
            }
            Op::Ln(x) => {
                let r = self.recip(x);
                let g = self.mul(gy, r);
                out.push((x, g));
            }
            Op::Recip(x) => {
                let y2 = self.square(y);
                let d = self.scale(y2, -1.0);
                let g = self.mul(gy, d);
                out.push((x, g));
            }
            Op::Sqrt(x) => {
                let r = self.recip(y);
                let d = self.scale(r, 0.5);
                let g = self.mul(gy, d);
                out.push((x, g));
            }
            Op::Sigmoid(x) => {
                // y (1 - y)
                let one_minus = self.scale(y, -1.0);
                let one_minus = self.add_scalar(one_minus, 1.0);
                let d = self.mul(y, one_minus);
                let g = self.mul(gy, d);
                out.push((x, g));
            }
            Op::Softplus(x) => {
                let s = self.sigmoid(x);
                let g = self.mul(gy, s);
                out.push((x, g));
            }
        }
        out
    }
}

fn op_inputs(op: &Op) -> Vec<Var> {
    match *op {
        Op::Leaf => vec![],
        Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::AddBias(a, b) => vec![a, b],
        Op::MatMul { a, b, .. } => vec![a, b],
        Op::Scale(x, _)
        | Op::AddScalar(x)
        | Op::SumRows(x)
        | Op::BroadcastRows(x)
        | Op::Sum(x)
        | Op::Expand(x)
        | Op::Reshape(x)
        | Op::LeakyRelu(x, _)
        | Op::Tanh(x)
        | Op::Exp(x)
        | Op::Ln(x)
        | Op::Recip(x)
        | Op::Sqrt(x)
        | Op::Sigmoid(x)
        | Op::Softplus(x) => vec![x],
        Op::Gather { x, .. } | Op::ScatterAdd { x, .. } => vec![x],
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}
