use super::kernels::{self, ConvGeometry};
use super::Tensor;
use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Softmax(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Embedding { table: Var, ids: Vec<usize> },
    Conv2d { x: Var, w: Var, b: Var, geom: ConvGeometry, cols: Vec<f64> },
    ConvTranspose2d { x: Var, w: Var, b: Var, geom: ConvGeometry },
    Reshape(Var),
    Transpose(Var),
    Concat { parts: Vec<Var>, axis: usize },
    Narrow { x: Var, axis: usize, start: usize },
    Crop(Var),
    Sum(Var),
    Mean(Var),
    CrossEntropy { logits: Var, targets: Vec<usize>, probs: Vec<f64> },
    SquaredError(Var, Var),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records operations in execution order so gradients can be replayed backwards.
///
/// Nodes are appended only, so the recording order is a topological order
/// and the graph is acyclic by construction.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node that required one.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `v`; zeros when `v` did not influence the loss.
    pub fn wrt(&self, v: Var) -> Tensor {
        let shape = self.shapes[v.0].clone();
        match &self.grads[v.0] {
            Some(g) => Tensor::from_parts(shape, g.clone()),
            None => Tensor::zeros(&shape),
        }
    }
}

fn shape_err(op: &'static str, detail: String) -> Error {
    Error::Shape { op, detail }
}

fn dims2(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [m, n] => Ok((*m, *n)),
        s => Err(shape_err(op, format!("expected a matrix, got {s:?}"))),
    }
}

fn dims3(op: &'static str, t: &Tensor) -> Result<(usize, usize, usize)> {
    match t.shape() {
        [c, h, w] => Ok((*c, *h, *w)),
        s => Err(shape_err(op, format!("expected [C,H,W], got {s:?}"))),
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, len: usize, f: impl FnOnce(&mut [f64])) {
    let g = slot.get_or_insert_with(|| vec![0.0; len]);
    f(g);
}

fn add_into(slot: &mut Option<Vec<f64>>, src: &[f64]) {
    match slot {
        Some(g) => g.iter_mut().zip(src).for_each(|(a, b)| *a += b),
        None => *slot = Some(src.to_vec()),
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Which side of zero every ReLU input fell on, in tape order. Two
    /// evaluations with equal patterns lie on the same linear piece.
    pub fn relu_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for node in &self.nodes {
            if let Op::Relu(a) = node.op {
                out.extend(self.value(a).data().iter().map(|&v| v > 0.0));
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, parents: &[Var]) -> Result<Var> {
        if value.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: name });
        }
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = dims2("matmul", self.value(a))?;
        let (k2, n) = dims2("matmul", self.value(b))?;
        if k != k2 {
            return Err(shape_err("matmul", format!("[{m},{k}] x [{k2},{n}]")));
        }
        let mut out = vec![0.0; m * n];
        kernels::gemm_nn(self.value(a).data(), self.value(b).data(), m, k, n, &mut out);
        self.push("matmul", Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b), &[a, b])
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(shape_err(op, format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape())));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x + y).collect();
        let shape = self.value(a).shape().to_vec();
        self.push("add", Tensor::from_parts(shape, data), Op::Add(a, b), &[a, b])
    }

    /// `a[m,n] + b[n]`, broadcasting `b` over rows.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, n) = dims2("add_row", self.value(a))?;
        if self.value(b).len() != n {
            return Err(shape_err("add_row", format!("[{m},{n}] + {:?}", self.value(b).shape())));
        }
        let bv = self.value(b).data();
        let data = self.value(a).data().iter().enumerate().map(|(i, x)| x + bv[i % n]).collect();
        self.push("add_row", Tensor::from_parts(vec![m, n], data), Op::AddRow(a, b), &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x * y).collect();
        let shape = self.value(a).shape().to_vec();
        self.push("mul", Tensor::from_parts(shape, data), Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let t = self.value(a);
        let value = Tensor::from_parts(t.shape().to_vec(), t.data().iter().map(|x| x * c).collect());
        self.push("scale", value, Op::Scale(a, c), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let value = Tensor::from_parts(t.shape().to_vec(), t.data().iter().map(|x| x.max(0.0)).collect());
        self.push("relu", value, Op::Relu(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let value = Tensor::from_parts(t.shape().to_vec(), t.data().iter().map(|&x| sigmoid(x)).collect());
        self.push("sigmoid", value, Op::Sigmoid(a), &[a])
    }

    /// Max-shifted softmax along the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let n = *t.shape().last().ok_or_else(|| shape_err("softmax", "scalar input".into()))?;
        let mut out = t.data().to_vec();
        for row in out.chunks_exact_mut(n) {
            softmax_in_place(row);
        }
        let shape = t.shape().to_vec();
        self.push("softmax", Tensor::from_parts(shape, out), Op::Softmax(a), &[a])
    }

    /// Normalizes each row of `x[m,n]`, then applies `gamma[n]` and `beta[n]`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (m, n) = dims2("layer_norm", self.value(x))?;
        if self.value(gamma).len() != n || self.value(beta).len() != n {
            return Err(shape_err("layer_norm", format!("row width {n} vs affine parameters")));
        }
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = vec![0.0; m * n];
        let mut inv_std = vec![0.0; m];
        let mut out = vec![0.0; m * n];
        for (r, row) in self.value(x).data().chunks_exact(n).enumerate() {
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std[r] = is;
            for j in 0..n {
                let h = (row[j] - mean) * is;
                xhat[r * n + j] = h;
                out[r * n + j] = h * g[j] + b[j];
            }
        }
        let op = Op::LayerNorm { x, gamma, beta, xhat, inv_std };
        self.push("layer_norm", Tensor::from_parts(vec![m, n], out), op, &[x, gamma, beta])
    }

    /// Rows of `table[V,d]` selected by `ids`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (v, d) = dims2("embedding", self.value(table))?;
        if let Some(bad) = ids.iter().find(|&&i| i >= v) {
            return Err(shape_err("embedding", format!("id {bad} outside vocabulary of {v}")));
        }
        let t = self.value(table).data();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            out.extend_from_slice(&t[i * d..(i + 1) * d]);
        }
        let op = Op::Embedding { table, ids: ids.to_vec() };
        self.push("embedding", Tensor::from_parts(vec![ids.len(), d], out), op, &[table])
    }

    /// `x[C,H,W] ⋆ w[O,C,k,k] + b[O]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let (c, h, wd) = dims3("conv2d", self.value(x))?;
        let (o, k) = match self.value(w).shape() {
            [o, c2, k, k2] if *c2 == c && k == k2 => (*o, *k),
            s => return Err(shape_err("conv2d", format!("weight {s:?} for {c} input channels"))),
        };
        if self.value(b).len() != o {
            return Err(shape_err("conv2d", format!("bias of {} for {o} filters", self.value(b).len())));
        }
        let geom = ConvGeometry::new(c, h, wd, k, stride, pad)
            .ok_or_else(|| shape_err("conv2d", format!("kernel {k} does not fit {h}x{wd} with pad {pad}")))?;
        let cols = kernels::im2col(self.value(x).data(), &geom);
        let spatial = geom.col_cols();
        let mut out = vec![0.0; o * spatial];
        for (oc, chunk) in out.chunks_exact_mut(spatial).enumerate() {
            chunk.fill(self.value(b).data()[oc]);
        }
        kernels::gemm_nn(self.value(w).data(), &cols, o, geom.col_rows(), spatial, &mut out);
        let value = Tensor::from_parts(vec![o, geom.out_h, geom.out_w], out);
        self.push("conv2d", value, Op::Conv2d { x, w, b, geom, cols }, &[x, w, b])
    }

    /// Transposed convolution of `x[C,H,W]` with `w[C,O,k,k]` and bias `b[O]`.
    ///
    /// The output side is `(H - 1)·stride - 2·pad + k + output_pad`.
    pub fn conv_transpose2d(
        &mut self,
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
        pad: usize,
        output_pad: usize,
    ) -> Result<Var> {
        let (c, h, wd) = dims3("conv_transpose2d", self.value(x))?;
        let (o, k) = match self.value(w).shape() {
            [c2, o, k, k2] if *c2 == c && k == k2 => (*o, *k),
            s => return Err(shape_err("conv_transpose2d", format!("weight {s:?} for {c} input channels"))),
        };
        if self.value(b).len() != o {
            return Err(shape_err("conv_transpose2d", format!("bias of {} for {o} filters", self.value(b).len())));
        }
        if output_pad >= stride.max(1) {
            return Err(shape_err("conv_transpose2d", "output padding must be below the stride".into()));
        }
        let out_h = ((h - 1) * stride + k + output_pad).checked_sub(2 * pad);
        let out_w = ((wd - 1) * stride + k + output_pad).checked_sub(2 * pad);
        let (Some(out_h), Some(out_w)) = (out_h, out_w) else {
            return Err(shape_err("conv_transpose2d", "padding exceeds output".into()));
        };
        // The matching forward convolution maps the output grid back onto the input grid.
        let geom = ConvGeometry::new(o, out_h, out_w, k, stride, pad)
            .filter(|g| g.out_h == h && g.out_w == wd)
            .ok_or_else(|| shape_err("conv_transpose2d", "inconsistent geometry".into()))?;
        let mut cols = vec![0.0; geom.col_rows() * geom.col_cols()];
        kernels::gemm_tn(self.value(w).data(), self.value(x).data(), geom.col_rows(), c, h * wd, &mut cols);
        let spatial = out_h * out_w;
        let mut out = vec![0.0; o * spatial];
        kernels::col2im(&cols, &geom, &mut out);
        for (oc, chunk) in out.chunks_exact_mut(spatial).enumerate() {
            let bias = self.value(b).data()[oc];
            chunk.iter_mut().for_each(|v| *v += bias);
        }
        let value = Tensor::from_parts(vec![o, out_h, out_w], out);
        self.push("conv_transpose2d", value, Op::ConvTranspose2d { x, w, b, geom }, &[x, w, b])
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a);
        if shape.iter().product::<usize>() != t.len() {
            return Err(shape_err("reshape", format!("{:?} -> {shape:?}", t.shape())));
        }
        let value = Tensor::from_parts(shape.to_vec(), t.data().to_vec());
        self.push("reshape", value, Op::Reshape(a), &[a])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (m, n) = dims2("transpose", self.value(a))?;
        let data = kernels::transpose(self.value(a).data(), m, n);
        self.push("transpose", Tensor::from_parts(vec![n, m], data), Op::Transpose(a), &[a])
    }

    /// Joins matrices along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| shape_err("concat", "no inputs".into()))?;
        let (m0, n0) = dims2("concat", self.value(first))?;
        let mut dims = Vec::with_capacity(parts.len());
        for &p in parts {
            let (m, n) = dims2("concat", self.value(p))?;
            let ok = match axis {
                0 => n == n0,
                1 => m == m0,
                _ => false,
            };
            if !ok {
                return Err(shape_err("concat", format!("[{m},{n}] along axis {axis} with [{m0},{n0}]")));
            }
            dims.push((m, n));
        }
        let (value, shape) = if axis == 0 {
            let mut out = Vec::new();
            for &p in parts {
                out.extend_from_slice(self.value(p).data());
            }
            let rows = dims.iter().map(|d| d.0).sum();
            (out, vec![rows, n0])
        } else {
            let cols: usize = dims.iter().map(|d| d.1).sum();
            let mut out = vec![0.0; m0 * cols];
            let mut offset = 0;
            for (&p, &(_, n)) in parts.iter().zip(&dims) {
                let src = self.value(p).data();
                for r in 0..m0 {
                    out[r * cols + offset..r * cols + offset + n].copy_from_slice(&src[r * n..(r + 1) * n]);
                }
                offset += n;
            }
            (out, vec![m0, cols])
        };
        let op = Op::Concat { parts: parts.to_vec(), axis };
        self.push("concat", Tensor::from_parts(shape, value), op, parts)
    }

    /// `len` consecutive rows (`axis = 0`) or columns (`axis = 1`) starting at `start`.
    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let (m, n) = dims2("narrow", self.value(x))?;
        let extent = match axis {
            0 => m,
            1 => n,
            _ => return Err(shape_err("narrow", format!("axis {axis}"))),
        };
        if start + len > extent {
            return Err(shape_err("narrow", format!("{start}+{len} beyond {extent}")));
        }
        let src = self.value(x).data();
        let (data, shape) = if axis == 0 {
            (src[start * n..(start + len) * n].to_vec(), vec![len, n])
        } else {
            let mut out = Vec::with_capacity(m * len);
            for r in 0..m {
                out.extend_from_slice(&src[r * n + start..r * n + start + len]);
            }
            (out, vec![m, len])
        };
        self.push("narrow", Tensor::from_parts(shape, data), Op::Narrow { x, axis, start }, &[x])
    }

    /// Top-left `height × width` window of every channel of `x[C,H,W]`.
    pub fn crop(&mut self, x: Var, height: usize, width: usize) -> Result<Var> {
        let (c, h, w) = dims3("crop", self.value(x))?;
        if height > h || width > w || height == 0 || width == 0 {
            return Err(shape_err("crop", format!("{height}x{width} from {h}x{w}")));
        }
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(c * height * width);
        for ch in 0..c {
            for y in 0..height {
                let at = (ch * h + y) * w;
                out.extend_from_slice(&src[at..at + width]);
            }
        }
        self.push("crop", Tensor::from_parts(vec![c, height, width], out), Op::Crop(x), &[x])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(shape_err("mean", "empty tensor".into()));
        }
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push("mean", Tensor::scalar(s), Op::Mean(a), &[a])
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of `logits[n,V]`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let (n, v) = dims2("cross_entropy", self.value(logits))?;
        if targets.len() != n || n == 0 {
            return Err(shape_err("cross_entropy", format!("{} targets for {n} rows", targets.len())));
        }
        if let Some(bad) = targets.iter().find(|&&t| t >= v) {
            return Err(shape_err("cross_entropy", format!("target {bad} outside {v} classes")));
        }
        let mut probs = self.value(logits).data().to_vec();
        let mut loss = 0.0;
        for (row, &t) in probs.chunks_exact_mut(v).zip(targets) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            loss += lse - row[t];
            softmax_in_place(row);
        }
        let op = Op::CrossEntropy { logits, targets: targets.to_vec(), probs };
        self.push("cross_entropy", Tensor::scalar(loss / n as f64), op, &[logits])
    }

    /// `mean((a - b)²)`.
    pub fn squared_error(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("squared_error", a, b)?;
        let n = self.value(a).len();
        let s: f64 = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| (x - y) * (x - y)).sum();
        self.push("squared_error", Tensor::scalar(s / n as f64), Op::SquaredError(a, b), &[a, b])
    }

    /// Reverse-mode accumulation from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(shape_err("backward", format!("loss has shape {:?}", self.value(loss).shape())));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        for (slot, node) in grads.iter_mut().zip(&self.nodes) {
            if !node.requires_grad {
                *slot = None;
            }
        }
        Ok(Gradients { grads, shapes })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| self.nodes[v.0].value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (self.value(*a).shape()[0], self.value(*a).shape()[1]);
                let n = self.value(*b).shape()[1];
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], m * k, |da| kernels::gemm_nt(g, val(*b), m, n, k, da));
                }
                if self.wants(*b) {
                    accumulate(&mut grads[b.0], k * n, |db| kernels::gemm_tn(val(*a), g, k, m, n, db));
                }
            }
            Op::Add(a, b) => {
                for p in [a, b] {
                    if self.wants(*p) {
                        add_into(&mut grads[p.0], g);
                    }
                }
            }
            Op::AddRow(a, b) => {
                if self.wants(*a) {
                    add_into(&mut grads[a.0], g);
                }
                if self.wants(*b) {
                    let n = self.value(*b).len();
                    accumulate(&mut grads[b.0], n, |db| {
                        for row in g.chunks_exact(n) {
                            db.iter_mut().zip(row).for_each(|(d, x)| *d += x);
                        }
                    });
                }
            }
            Op::Mul(a, b) => {
                for (p, q) in [(a, b), (b, a)] {
                    if self.wants(*p) {
                        let other = val(*q);
                        accumulate(&mut grads[p.0], g.len(), |d| {
                            for ((d, gi), o) in d.iter_mut().zip(g).zip(other) {
                                *d += gi * o;
                            }
                        });
                    }
                }
            }
            Op::Scale(a, c) => {
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], g.len(), |d| d.iter_mut().zip(g).for_each(|(d, x)| *d += c * x));
                }
            }
            Op::Relu(a) => {
                if self.wants(*a) {
                    let x = val(*a);
                    accumulate(&mut grads[a.0], g.len(), |d| {
                        for ((d, gi), xi) in d.iter_mut().zip(g).zip(x) {
                            if *xi > 0.0 {
                                *d += gi;
                            }
                        }
                    });
                }
            }
            Op::Sigmoid(a) => {
                if self.wants(*a) {
                    let y = node.value.data();
                    accumulate(&mut grads[a.0], g.len(), |d| {
                        for ((d, gi), yi) in d.iter_mut().zip(g).zip(y) {
                            *d += gi * yi * (1.0 - yi);
                        }
                    });
                }
            }
            Op::Softmax(a) => {
                if self.wants(*a) {
                    let y = node.value.data();
                    let n = *node.value.shape().last().unwrap();
                    accumulate(&mut grads[a.0], g.len(), |d| {
                        for ((drow, grow), yrow) in d.chunks_exact_mut(n).zip(g.chunks_exact(n)).zip(y.chunks_exact(n)) {
                            let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                            for ((dd, gi), yi) in drow.iter_mut().zip(grow).zip(yrow) {
                                *dd += yi * (gi - dot);
                            }
                        }
                    });
                }
            }
            Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                let n = self.value(*gamma).len();
                let gam = val(*gamma);
                if self.wants(*gamma) {
                    accumulate(&mut grads[gamma.0], n, |dg| {
                        for (grow, hrow) in g.chunks_exact(n).zip(xhat.chunks_exact(n)) {
                            for j in 0..n {
                                dg[j] += grow[j] * hrow[j];
                            }
                        }
                    });
                }
                if self.wants(*beta) {
                    accumulate(&mut grads[beta.0], n, |db| {
                        for grow in g.chunks_exact(n) {
                            db.iter_mut().zip(grow).for_each(|(d, x)| *d += x);
                        }
                    });
                }
                if self.wants(*x) {
                    accumulate(&mut grads[x.0], g.len(), |dx| {
                        for (r, (grow, hrow)) in g.chunks_exact(n).zip(xhat.chunks_exact(n)).enumerate() {
                            let mut mean_d = 0.0;
                            let mut mean_dh = 0.0;
                            for j in 0..n {
                                let dh = grow[j] * gam[j];
                                mean_d += dh;
                                mean_dh += dh * hrow[j];
                            }
                            mean_d /= n as f64;
                            mean_dh /= n as f64;
                            for j in 0..n {
                                let dh = grow[j] * gam[j];
                                dx[r * n + j] += inv_std[r] * (dh - mean_d - hrow[j] * mean_dh);
                            }
                        }
                    });
                }
            }
            Op::Embedding { table, ids } => {
                if self.wants(*table) {
                    let d = self.value(*table).shape()[1];
                    let len = self.value(*table).len();
                    accumulate(&mut grads[table.0], len, |dt| {
                        for (row, &i) in g.chunks_exact(d).zip(ids) {
                            dt[i * d..(i + 1) * d].iter_mut().zip(row).for_each(|(a, b)| *a += b);
                        }
                    });
                }
            }
            Op::Conv2d { x, w, b, geom, cols } => {
                let o = self.value(*w).shape()[0];
                let spatial = geom.col_cols();
                let rows = geom.col_rows();
                if self.wants(*b) {
                    accumulate(&mut grads[b.0], o, |db| {
                        for (d, chunk) in db.iter_mut().zip(g.chunks_exact(spatial)) {
                            *d += chunk.iter().sum::<f64>();
                        }
                    });
                }
                if self.wants(*w) {
                    accumulate(&mut grads[w.0], o * rows, |dw| kernels::gemm_nt(g, cols, o, spatial, rows, dw));
                }
                if self.wants(*x) {
                    let mut dcols = vec![0.0; rows * spatial];
                    kernels::gemm_tn(val(*w), g, rows, o, spatial, &mut dcols);
                    let len = self.value(*x).len();
                    accumulate(&mut grads[x.0], len, |dx| kernels::col2im(&dcols, geom, dx));
                }
            }
            Op::ConvTranspose2d { x, w, b, geom } => {
                let c = self.value(*x).shape()[0];
                let in_spatial = geom.col_cols();
                let out_spatial = geom.in_h * geom.in_w;
                let o = geom.channels;
                if self.wants(*b) {
                    accumulate(&mut grads[b.0], o, |db| {
                        for (d, chunk) in db.iter_mut().zip(g.chunks_exact(out_spatial)) {
                            *d += chunk.iter().sum::<f64>();
                        }
                    });
                }
                if self.wants(*w) || self.wants(*x) {
                    let dcols = kernels::im2col(g, geom);
                    let rows = geom.col_rows();
                    if self.wants(*w) {
                        accumulate(&mut grads[w.0], c * rows, |dw| {
                            kernels::gemm_nt(val(*x), &dcols, c, in_spatial, rows, dw)
                        });
                    }
                    if self.wants(*x) {
                        accumulate(&mut grads[x.0], c * in_spatial, |dx| {
                            kernels::gemm_nn(val(*w), &dcols, c, rows, in_spatial, dx)
                        });
                    }
                }
            }
            Op::Reshape(a) => {
                if self.wants(*a) {
                    add_into(&mut grads[a.0], g);
                }
            }
            Op::Transpose(a) => {
                if self.wants(*a) {
                    let (m, n) = (self.value(*a).shape()[0], self.value(*a).shape()[1]);
                    add_into(&mut grads[a.0], &kernels::transpose(g, n, m));
                }
            }
            Op::Concat { parts, axis } => {
                let cols = node.value.shape()[1];
                let mut offset = 0;
                for p in parts {
                    let (m, n) = (self.value(*p).shape()[0], self.value(*p).shape()[1]);
                    if self.wants(*p) {
                        accumulate(&mut grads[p.0], m * n, |d| {
                            if *axis == 0 {
                                d.iter_mut().zip(&g[offset * cols..(offset + m) * cols]).for_each(|(a, b)| *a += b);
                            } else {
                                for r in 0..m {
                                    let src = &g[r * cols + offset..r * cols + offset + n];
                                    d[r * n..(r + 1) * n].iter_mut().zip(src).for_each(|(a, b)| *a += b);
                                }
                            }
                        });
                    }
                    offset += if *axis == 0 { m } else { n };
                }
            }
            Op::Narrow { x, axis, start } => {
                if self.wants(*x) {
                    let (m, n) = (self.value(*x).shape()[0], self.value(*x).shape()[1]);
                    let len = node.value.shape()[*axis];
                    accumulate(&mut grads[x.0], m * n, |d| {
                        if *axis == 0 {
                            d[start * n..(start + len) * n].iter_mut().zip(g).for_each(|(a, b)| *a += b);
                        } else {
                            for r in 0..m {
                                d[r * n + start..r * n + start + len]
                                    .iter_mut()
                                    .zip(&g[r * len..(r + 1) * len])
                                    .for_each(|(a, b)| *a += b);
                            }
                        }
                    });
                }
            }
            Op::Crop(x) => {
                if self.wants(*x) {
                    let (c, h, w) = (self.value(*x).shape()[0], self.value(*x).shape()[1], self.value(*x).shape()[2]);
                    let (ch, cw) = (node.value.shape()[1], node.value.shape()[2]);
                    accumulate(&mut grads[x.0], c * h * w, |d| {
                        for k in 0..c {
                            for y in 0..ch {
                                let at = (k * h + y) * w;
                                let src = &g[(k * ch + y) * cw..(k * ch + y + 1) * cw];
                                d[at..at + cw].iter_mut().zip(src).for_each(|(a, b)| *a += b);
                            }
                        }
                    });
                }
            }
            Op::Sum(a) => {
                if self.wants(*a) {
                    let len = self.value(*a).len();
                    accumulate(&mut grads[a.0], len, |d| d.iter_mut().for_each(|x| *x += g[0]));
                }
            }
            Op::Mean(a) => {
                if self.wants(*a) {
                    let len = self.value(*a).len();
                    let s = g[0] / len as f64;
                    accumulate(&mut grads[a.0], len, |d| d.iter_mut().for_each(|x| *x += s));
                }
            }
            Op::CrossEntropy { logits, targets, probs } => {
                if self.wants(*logits) {
                    let (n, v) = (self.value(*logits).shape()[0], self.value(*logits).shape()[1]);
                    let s = g[0] / n as f64;
                    accumulate(&mut grads[logits.0], n * v, |d| {
                        for (r, &t) in targets.iter().enumerate() {
                            for j in 0..v {
                                let ind = if j == t { 1.0 } else { 0.0 };
                                d[r * v + j] += s * (probs[r * v + j] - ind);
                            }
                        }
                    });
                }
            }
            Op::SquaredError(a, b) => {
                let n = self.value(*a).len();
                let s = 2.0 * g[0] / n as f64;
                let (av, bv) = (val(*a), val(*b));
                for (p, sign) in [(a, 1.0), (b, -1.0)] {
                    if self.wants(*p) {
                        accumulate(&mut grads[p.0], n, |d| {
                            for ((d, x), y) in d.iter_mut().zip(av).zip(bv) {
                                *d += sign * s * (x - y);
                            }
                        });
                    }
                }
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}
