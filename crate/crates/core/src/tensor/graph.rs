use std::collections::HashMap;

use super::params::{ParamId, ParamStore};
use super::{matmul_acc, matmul_at_acc, matmul_bt_acc, Tensor};
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    channels: usize,
    height: usize,
    width: usize,
    out_channels: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    out_h: usize,
    out_w: usize,
}

impl ConvGeom {
    fn patch(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Source index of column entry (row `r`, output position `q`) under
    /// replicate padding.
    #[inline]
    fn source(&self, r: usize, q: usize) -> usize {
        let c = r / (self.kh * self.kw);
        let ki = (r / self.kw) % self.kh;
        let kj = r % self.kw;
        let (oy, ox) = (q / self.out_w, q % self.out_w);
        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
        let ix = (ox * self.stride + kj) as isize - self.pad as isize;
        let iy = iy.clamp(0, self.height as isize - 1) as usize;
        let ix = ix.clamp(0, self.width as isize - 1) as usize;
        (c * self.height + iy) * self.width + ix
    }
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddBias(Var, Var),
    Hadamard(Var, Var),
    Scale(Var, f64),
    Concat { inputs: Vec<Var>, axis: usize },
    Reshape(Var),
    Transpose(Var),
    MeanAxis { input: Var, axis: usize },
    SumAll(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softmax { input: Var, axis: usize },
    Embedding { table: Var, ids: Vec<usize> },
    Conv2d { input: Var, kernel: Var, bias: Var, geom: ConvGeom, cols: Vec<f64> },
    CrossEntropy { logits: Var, class: usize, probs: Vec<f64> },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Computation record for one forward pass.
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    params: HashMap<ParamId, Var>,
    checked: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

/// Splits a shape around `axis` into (outer, axis length, inner).
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl Graph {
    /// A graph in checked mode: every op output is scanned for NaN/Inf.
    pub fn new() -> Self {
        Self { nodes: Vec::new(), grads: Vec::new(), params: HashMap::new(), checked: true }
    }

    pub fn unchecked() -> Self {
        Self { checked: false, ..Self::new() }
    }

    pub fn is_checked(&self) -> bool {
        self.checked
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op, needs_grad: bool) -> Result<Var> {
        if self.checked && value.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: op_name });
        }
        self.nodes.push(Node { value, op, needs_grad });
        self.grads.push(None);
        Ok(Var(self.nodes.len() - 1))
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last [`Graph::backward`] loss with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    /// Leaf that does not receive gradients.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node { value: t, op: Op::Leaf, needs_grad: false });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    /// Leaf that receives gradients.
    pub fn variable(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node { value: t, op: Op::Leaf, needs_grad: true });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    /// Brings a stored parameter into the graph; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.variable(store.value(id).clone());
        self.params.insert(id, v);
        v
    }

    /// Parameters used in this graph with their gradient, if any.
    pub fn param_vars(&self) -> impl Iterator<Item = (ParamId, Var)> + '_ {
        self.params.iter().map(|(&id, &v)| (id, v))
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2("matmul")?;
        let (k2, n) = self.value(b).dims2("matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", format!("{:?} x {:?}", self.shape(a), self.shape(b))));
        }
        let mut out = vec![0.0; m * n];
        matmul_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let ng = self.needs(a) || self.needs(b);
        self.push("matmul", Tensor { shape: vec![m, n], data: out }, Op::MatMul(a, b), ng)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    fn zip_with(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        self.same_shape(name, a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| f(x, y)).collect();
        let t = Tensor { shape: self.shape(a).to_vec(), data };
        let ng = self.needs(a) || self.needs(b);
        self.push(name, t, op, ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("hadamard", a, b, |x, y| x * y, Op::Hadamard(a, b))
    }

    /// Adds `bias` (one value per entry of the last axis) to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let n = *self.shape(x).last().unwrap_or(&0);
        if n == 0 || self.value(bias).len() != n {
            return Err(Error::shape("add_bias", format!("{:?} + bias {:?}", self.shape(x), self.shape(bias))));
        }
        let b = self.value(bias).data();
        let data = self.value(x).data().iter().enumerate().map(|(i, &v)| v + b[i % n]).collect();
        let t = Tensor { shape: self.shape(x).to_vec(), data };
        let ng = self.needs(x) || self.needs(bias);
        self.push("add_bias", t, Op::AddBias(x, bias), ng)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let data = self.value(x).data().iter().map(|v| v * c).collect();
        let t = Tensor { shape: self.shape(x).to_vec(), data };
        let ng = self.needs(x);
        self.push("scale", t, Op::Scale(x, c), ng)
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs.first().ok_or_else(|| Error::shape("concat", "no inputs"))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::shape("concat", format!("axis {axis} for shape {base:?}")));
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::shape("concat", format!("{:?} vs {:?} on axis {axis}", s, base)));
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&base, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let t = self.value(v);
                let chunk = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let ng = inputs.iter().any(|&v| self.needs(v));
        self.push("concat", Tensor { shape, data }, Op::Concat { inputs: inputs.to_vec(), axis }, ng)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        if shape.iter().product::<usize>() != self.value(x).len() {
            return Err(Error::shape("reshape", format!("{:?} -> {:?}", self.shape(x), shape)));
        }
        let t = Tensor { shape: shape.to_vec(), data: self.value(x).data().to_vec() };
        let ng = self.needs(x);
        self.push("reshape", t, Op::Reshape(x), ng)
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.value(x).dims2("transpose")?;
        let src = self.value(x).data();
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = src[i * c + j];
            }
        }
        let ng = self.needs(x);
        self.push("transpose", Tensor { shape: vec![c, r], data }, Op::Transpose(x), ng)
    }

    /// Mean over one axis; the axis is removed from the shape (a 1-D input
    /// yields shape `[1]`).
    pub fn mean_pool(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || shape[axis] == 0 {
            return Err(Error::shape("mean_pool", format!("axis {axis} for shape {shape:?}")));
        }
        let (outer, n, inner) = split_axis(&shape, axis);
        let src = self.value(x).data();
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for i in 0..n {
                let row = &src[(o * n + i) * inner..(o * n + i + 1) * inner];
                for (d, s) in data[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                    *d += s;
                }
            }
        }
        data.iter_mut().for_each(|d| *d /= n as f64);
        let mut out_shape = shape;
        out_shape.remove(axis);
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        let ng = self.needs(x);
        self.push("mean_pool", Tensor { shape: out_shape, data }, Op::MeanAxis { input: x, axis }, ng)
    }

    pub fn sum_all(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().sum();
        let ng = self.needs(x);
        self.push("sum_all", Tensor::scalar(s), Op::SumAll(x), ng)
    }

    fn map(&mut self, name: &'static str, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let data = self.value(x).data().iter().map(|&v| f(v)).collect();
        let t = Tensor { shape: self.shape(x).to_vec(), data };
        let ng = self.needs(x);
        self.push(name, t, op, ng)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.map("relu", x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.map("tanh", x, f64::tanh, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.map("sigmoid", x, |v| 1.0 / (1.0 + (-v).exp()), Op::Sigmoid(x))
    }

    /// Max-subtracted softmax along `axis`.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::shape("softmax", format!("axis {axis} for shape {shape:?}")));
        }
        let (outer, n, inner) = split_axis(&shape, axis);
        let src = self.value(x).data();
        let mut data = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |j: usize| (o * n + j) * inner + i;
                let max = (0..n).map(|j| src[idx(j)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for j in 0..n {
                    let e = (src[idx(j)] - max).exp();
                    data[idx(j)] = e;
                    total += e;
                }
                for j in 0..n {
                    data[idx(j)] /= total;
                }
            }
        }
        let ng = self.needs(x);
        self.push("softmax", Tensor { shape, data }, Op::Softmax { input: x, axis }, ng)
    }

    /// Rows of a `[vocab, dim]` table, one per id, as `[ids.len(), dim]`.
    pub fn embedding_lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (rows, dim) = self.value(table).dims2("embedding_lookup")?;
        if ids.is_empty() {
            return Err(Error::shape("embedding_lookup", "empty id list"));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= rows) {
            return Err(Error::shape("embedding_lookup", format!("id {bad} out of range for {rows} rows")));
        }
        let src = self.value(table).data();
        let data = ids.iter().flat_map(|&i| src[i * dim..(i + 1) * dim].iter().copied()).collect();
        let ng = self.needs(table);
        let t = Tensor { shape: vec![ids.len(), dim], data };
        self.push("embedding_lookup", t, Op::Embedding { table, ids: ids.to_vec() }, ng)
    }

    /// 2-D convolution of a `[C, H, W]` input with `[O, C, kh, kw]` kernels and
    /// a bias of length `O`, using replicate padding of `pad` pixels.
    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var, stride: usize, pad: usize) -> Result<Var> {
        let (is, ks) = (self.shape(input).to_vec(), self.shape(kernel).to_vec());
        let bad = || Error::shape("conv2d", format!("input {is:?}, kernel {ks:?}, stride {stride}"));
        let (c, h, w) = match is[..] {
            [c, h, w] => (c, h, w),
            _ => return Err(bad()),
        };
        let (o, kc, kh, kw) = match ks[..] {
            [o, kc, kh, kw] => (o, kc, kh, kw),
            _ => return Err(bad()),
        };
        if c != kc || stride == 0 || h + 2 * pad < kh || w + 2 * pad < kw || self.value(bias).len() != o {
            return Err(bad());
        }
        let geom = ConvGeom {
            channels: c,
            height: h,
            width: w,
            out_channels: o,
            kh,
            kw,
            stride,
            pad,
            out_h: (h + 2 * pad - kh) / stride + 1,
            out_w: (w + 2 * pad - kw) / stride + 1,
        };
        let (patch, positions) = (geom.patch(), geom.positions());
        let src = self.value(input).data();
        let mut cols = vec![0.0; patch * positions];
        for r in 0..patch {
            for q in 0..positions {
                cols[r * positions + q] = src[geom.source(r, q)];
            }
        }
        let mut out = vec![0.0; o * positions];
        let b = self.value(bias).data();
        for (oc, row) in out.chunks_mut(positions).enumerate() {
            row.fill(b[oc]);
        }
        matmul_acc(self.value(kernel).data(), &cols, &mut out, o, patch, positions);
        let ng = self.needs(input) || self.needs(kernel) || self.needs(bias);
        let t = Tensor { shape: vec![o, geom.out_h, geom.out_w], data: out };
        self.push("conv2d", t, Op::Conv2d { input, kernel, bias, geom, cols }, ng)
    }

    /// Softmax cross-entropy of a logit vector against a class index.
    pub fn cross_entropy(&mut self, logits: Var, class: usize) -> Result<Var> {
        let z = self.value(logits).data();
        if class >= z.len() {
            return Err(Error::shape("cross_entropy", format!("class {class} for {} logits", z.len())));
        }
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let loss = total.ln() + max - z[class];
        let probs = exps.iter().map(|e| e / total).collect();
        let ng = self.needs(logits);
        self.push("cross_entropy", Tensor::scalar(loss), Op::CrossEntropy { logits, class, probs }, ng)
    }

    /// `[1, n]` row repeated into `[m, n]` (a matmul with a column of ones).
    pub fn repeat_rows(&mut self, row: Var, m: usize) -> Result<Var> {
        let ones = self.constant(Tensor::filled(&[m, 1], 1.0));
        self.matmul(ones, row)
    }

    /// Fills gradients of the scalar `loss` with respect to every node that
    /// depends on a gradient-carrying leaf.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape("backward", format!("loss must be scalar, got {:?}", self.shape(loss))));
        }
        self.zero_grad();
        self.grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = self.grads[i].take() else { continue };
            if self.nodes[i].needs_grad {
                self.propagate(i, &g);
            }
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn propagate(&mut self, i: usize, g: &[f64]) {
        let Graph { nodes, grads, .. } = self;
        let (before, rest) = nodes.split_at(i);
        let node = &rest[0];
        let val = |v: Var| &before[v.0].value;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !before[v.0].needs_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; before[v.0].value.len()]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (val(*a).shape()[0], val(*a).shape()[1]);
                let n = val(*b).shape()[1];
                let (ad, bd) = (val(*a).data(), val(*b).data());
                acc(*a, &mut |da| matmul_bt_acc(g, bd, da, m, n, k));
                acc(*b, &mut |db| matmul_at_acc(ad, g, db, m, k, n));
            }
            Op::Add(a, b) => {
                acc(*a, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g));
                acc(*b, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g));
                acc(*b, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d -= g));
            }
            Op::AddBias(x, b) => {
                acc(*x, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g));
                let n = val(*b).len();
                acc(*b, &mut |d| g.iter().enumerate().for_each(|(j, g)| d[j % n] += g));
            }
            Op::Hadamard(a, b) => {
                let (ad, bd) = (val(*a).data(), val(*b).data());
                acc(*a, &mut |d| d.iter_mut().zip(g).zip(bd).for_each(|((d, g), y)| *d += g * y));
                acc(*b, &mut |d| d.iter_mut().zip(g).zip(ad).for_each(|((d, g), x)| *d += g * x));
            }
            Op::Scale(x, c) => acc(*x, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += c * g)),
            Op::Concat { inputs, axis } => {
                let total = node.value.shape()[*axis];
                let (outer, _, inner) = split_axis(node.value.shape(), *axis);
                let mut offset = 0;
                for &v in inputs {
                    let len = val(v).shape()[*axis] * inner;
                    acc(v, &mut |d| {
                        for o in 0..outer {
                            let src = &g[o * total * inner + offset..o * total * inner + offset + len];
                            d[o * len..(o + 1) * len].iter_mut().zip(src).for_each(|(d, g)| *d += g);
                        }
                    });
                    offset += len;
                }
            }
            Op::Reshape(x) => acc(*x, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g)),
            Op::Transpose(x) => {
                let (r, c) = (val(*x).shape()[0], val(*x).shape()[1]);
                acc(*x, &mut |d| {
                    for i in 0..r {
                        for j in 0..c {
                            d[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Op::MeanAxis { input, axis } => {
                let (outer, n, inner) = split_axis(val(*input).shape(), *axis);
                acc(*input, &mut |d| {
                    for o in 0..outer {
                        for j in 0..n {
                            for k in 0..inner {
                                d[(o * n + j) * inner + k] += g[o * inner + k] / n as f64;
                            }
                        }
                    }
                });
            }
            Op::SumAll(x) => acc(*x, &mut |d| d.iter_mut().for_each(|d| *d += g[0])),
            Op::Relu(x) => {
                let y = node.value.data();
                acc(*x, &mut |d| {
                    d.iter_mut().zip(g).zip(y).for_each(|((d, g), y)| {
                        if *y > 0.0 {
                            *d += g
                        }
                    })
                });
            }
            Op::Tanh(x) => {
                let y = node.value.data();
                acc(*x, &mut |d| d.iter_mut().zip(g).zip(y).for_each(|((d, g), y)| *d += g * (1.0 - y * y)));
            }
            Op::Sigmoid(x) => {
                let y = node.value.data();
                acc(*x, &mut |d| d.iter_mut().zip(g).zip(y).for_each(|((d, g), y)| *d += g * y * (1.0 - y)));
            }
            Op::Softmax { input, axis } => {
                let (outer, n, inner) = split_axis(node.value.shape(), *axis);
                let y = node.value.data();
                acc(*input, &mut |d| {
                    for o in 0..outer {
                        for i in 0..inner {
                            let idx = |j: usize| (o * n + j) * inner + i;
                            let dot: f64 = (0..n).map(|j| g[idx(j)] * y[idx(j)]).sum();
                            for j in 0..n {
                                d[idx(j)] += y[idx(j)] * (g[idx(j)] - dot);
                            }
                        }
                    }
                });
            }
            Op::Embedding { table, ids } => {
                let dim = val(*table).shape()[1];
                acc(*table, &mut |d| {
                    for (r, &id) in ids.iter().enumerate() {
                        d[id * dim..(id + 1) * dim].iter_mut().zip(&g[r * dim..(r + 1) * dim]).for_each(|(d, g)| *d += g);
                    }
                });
            }
            Op::Conv2d { input, kernel, bias, geom, cols } => {
                let (o, patch, positions) = (geom.out_channels, geom.patch(), geom.positions());
                acc(*bias, &mut |d| {
                    for (oc, row) in g.chunks(positions).enumerate() {
                        d[oc] += row.iter().sum::<f64>();
                    }
                });
                acc(*kernel, &mut |d| matmul_bt_acc(g, cols, d, o, positions, patch));
                let kd = val(*kernel).data();
                acc(*input, &mut |d| {
                    let mut dcols = vec![0.0; patch * positions];
                    matmul_at_acc(kd, g, &mut dcols, o, patch, positions);
                    for r in 0..patch {
                        for q in 0..positions {
                            d[geom.source(r, q)] += dcols[r * positions + q];
                        }
                    }
                });
            }
            Op::CrossEntropy { logits, class, probs } => {
                acc(*logits, &mut |d| {
                    for (j, (d, p)) in d.iter_mut().zip(probs).enumerate() {
                        *d += g[0] * (p - if j == *class { 1.0 } else { 0.0 });
                    }
                });
            }
        }
    }
}
