//! Tape-based reverse-mode differentiation.
//!
//! Every operation appends one node holding its output value. `backward`
//! walks the tape once, in exact reverse of the recording order, so the
//! accumulation order of every gradient is fixed.

use std::collections::{HashMap, HashSet};

use super::rng::RngState;
use super::tensor::{Module, Param, ParamId, Tensor};
use crate::error::{Error, Result};

/// Handle to a node of one [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unary {
    Relu,
    Sigmoid,
    Tanh,
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduce {
    Sum,
    Mean,
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Binary(Binary, Var, Var),
    AddBias { x: Var, bias: Var, axis: usize },
    Scale(Var, f64),
    AddScalar(Var),
    Unary(Unary, Var),
    Clamp { x: Var, lo: f64, hi: f64 },
    Conv1d { x: Var, kernels: Var, stride: usize },
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Dropout { x: Var, mask: Vec<f64> },
    Reduce { op: Reduce, x: Var, axis: Option<usize> },
    Concat { inputs: Vec<Var>, axis: usize },
    Reshape(Var),
    Slice { x: Var, axis: usize, start: usize },
    SwapLast(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

pub struct Graph {
    nodes: Vec<Node>,
    mode: Mode,
    params: HashMap<ParamId, Var>,
    frozen: HashSet<ParamId>,
    grads: Option<Vec<Option<Tensor>>>,
    kinks: u64,
}

/// `(outer, len, inner)` strides of `shape` around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, n: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * p];
    for i in 0..m {
        let row = &mut out[i * p..(i + 1) * p];
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * p..(k + 1) * p];
            for (o, &bk) in row.iter_mut().zip(brow) {
                *o += aik * bk;
            }
        }
    }
    out
}

const KINK_SEED: u64 = 0xcbf2_9ce4_8422_2325;

fn fold_kinks(mut h: u64, branches: impl Iterator<Item = u8>) -> u64 {
    for b in branches {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new(mode: Mode) -> Self {
        Graph {
            nodes: Vec::new(),
            mode,
            params: HashMap::new(),
            frozen: HashSet::new(),
            grads: None,
            kinks: KINK_SEED,
        }
    }

    /// Hash of every ReLU and clamp branch taken so far. Two graphs built
    /// by the same code with equal signatures are, with overwhelming
    /// probability, in the same piecewise-smooth region.
    pub fn kink_signature(&self) -> u64 {
        self.kinks
    }


    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, op: &'static str, value: Tensor, node_op: Op, requires_grad: bool) -> Result<Var> {
        if self.grads.is_some() {
            return Err(Error::State("graph already consumed by backward".into()));
        }
        if !value.is_finite() {
            return Err(Error::NonFinite { op });
        }
        self.nodes.push(Node {
            value,
            op: node_op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A leaf that receives a gradient (e.g. an input whose gradient is wanted).
    pub fn input(&mut self, t: Tensor) -> Result<Var> {
        self.push("input", t, Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Result<Var> {
        self.push("constant", t, Op::Leaf, false)
    }

    /// Binds a parameter once per graph; later calls return the same node.
    pub fn param(&mut self, p: &Param) -> Result<Var> {
        if let Some(&v) = self.params.get(&p.id()) {
            return Ok(v);
        }
        let trainable = !self.frozen.contains(&p.id());
        let v = self.push("param", p.value.clone(), Op::Leaf, trainable)?;
        self.params.insert(p.id(), v);
        Ok(v)
    }

    /// Parameters of `module` bound after this call carry no gradient.
    pub fn freeze(&mut self, module: &dyn Module) {
        for p in module.parameters() {
            self.frozen.insert(p.id());
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::dim(
                "matmul",
                format!("cannot multiply {:?} by {:?}", sa, sb),
            ));
        }
        let (m, n, p) = (sa[0], sa[1], sb[1]);
        let data = matmul_raw(self.value(a).data(), self.value(b).data(), m, n, p);
        let rg = self.needs(a) || self.needs(b);
        self.push("matmul", Tensor::new(vec![m, p], data)?, Op::MatMul(a, b), rg)
    }

    /// Elementwise binary op. Shapes must match unless one side holds a
    /// single element, which is broadcast.
    pub fn binary(&mut self, op: Binary, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let shape = if ta.shape() == tb.shape() || tb.numel() == 1 {
            ta.shape().to_vec()
        } else if ta.numel() == 1 {
            tb.shape().to_vec()
        } else {
            return Err(Error::dim(
                "elementwise",
                format!("shapes {:?} and {:?} differ", ta.shape(), tb.shape()),
            ));
        };
        let n: usize = shape.iter().product();
        let (da, db) = (ta.data(), tb.data());
        let ia = |i: usize| if da.len() == 1 { da[0] } else { da[i] };
        let ib = |i: usize| if db.len() == 1 { db[0] } else { db[i] };
        let data: Vec<f64> = (0..n)
            .map(|i| match op {
                Binary::Add => ia(i) + ib(i),
                Binary::Sub => ia(i) - ib(i),
                Binary::Mul => ia(i) * ib(i),
            })
            .collect();
        let rg = self.needs(a) || self.needs(b);
        self.push("elementwise", Tensor::new(shape, data)?, Op::Binary(op, a, b), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }

    /// Adds a vector along `axis` of `x`, broadcasting over all other axes.
    pub fn add_bias(&mut self, x: Var, bias: Var, axis: usize) -> Result<Var> {
        let sx = self.shape(x);
        let sb = self.shape(bias);
        if axis >= sx.len() || sb.len() != 1 || sb[0] != sx[axis] {
            return Err(Error::dim(
                "add_bias",
                format!("bias {:?} does not fit axis {} of {:?}", sb, axis, sx),
            ));
        }
        let (outer, len, inner) = split_axis(sx, axis);
        let b = self.value(bias).data();
        let mut data = self.value(x).data().to_vec();
        for o in 0..outer {
            for i in 0..len {
                let base = (o * len + i) * inner;
                for v in &mut data[base..base + inner] {
                    *v += b[i];
                }
            }
        }
        let shape = sx.to_vec();
        let rg = self.needs(x) || self.needs(bias);
        self.push("add_bias", Tensor::new(shape, data)?, Op::AddBias { x, bias, axis }, rg)
    }

    /// `x · w + b` for a row-major batch `x` of shape `[n, in]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.matmul(x, w)?;
        self.add_bias(xw, b, 1)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let t = self.value(x).map(|v| v * c);
        let rg = self.needs(x);
        self.push("scale", t, Op::Scale(x, c), rg)
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        let t = self.value(x).map(|v| v + c);
        let rg = self.needs(x);
        self.push("add_scalar", t, Op::AddScalar(x), rg)
    }

    pub fn unary(&mut self, op: Unary, x: Var) -> Result<Var> {
        let tx = self.value(x);
        let t = match op {
            Unary::Relu => tx.map(|v| v.max(0.0)),
            Unary::Sigmoid => tx.map(sigmoid),
            Unary::Tanh => tx.map(f64::tanh),
            Unary::Log => {
                if let Some(bad) = tx.data().iter().find(|&&v| v <= 0.0) {
                    return Err(Error::Domain {
                        op: "log",
                        detail: format!("non-positive input {}", bad),
                    });
                }
                tx.map(f64::ln)
            }
        };
        if op == Unary::Relu {
            self.kinks = fold_kinks(self.kinks, self.value(x).data().iter().map(|&v| (v > 0.0) as u8));
        }
        let rg = self.needs(x);
        self.push("unary", t, Op::Unary(op, x), rg)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Relu, x)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Sigmoid, x)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Tanh, x)
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Log, x)
    }

    /// Clamps into `[lo, hi]`; clipped entries pass no gradient.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Result<Var> {
        let t = self.value(x).map(|v| v.clamp(lo, hi));
        self.kinks = fold_kinks(
            self.kinks,
            self.value(x).data().iter().map(|&v| (v < lo) as u8 | ((v > hi) as u8) << 1),
        );
        let rg = self.needs(x);
        self.push("clamp", t, Op::Clamp { x, lo, hi }, rg)
    }

    /// Valid cross-correlation over the last axis.
    ///
    /// `x` is `[c_in, T]` or `[batch, c_in, T]`, `kernels` is
    /// `[c_out, c_in, w]`; output length is `(T - w) / stride + 1`.
    pub fn conv1d(&mut self, x: Var, kernels: Var, stride: usize) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let sk = self.shape(kernels).to_vec();
        if stride == 0 {
            return Err(Error::dim("conv1d", "stride must be at least 1"));
        }
        let (batch, c_in, len) = match sx.len() {
            2 => (1, sx[0], sx[1]),
            3 => (sx[0], sx[1], sx[2]),
            _ => return Err(Error::dim("conv1d", format!("input shape {:?}", sx))),
        };
        if sk.len() != 3 || sk[1] != c_in {
            return Err(Error::dim(
                "conv1d",
                format!("kernels {:?} do not match input {:?}", sk, sx),
            ));
        }
        let (c_out, width) = (sk[0], sk[2]);
        if width == 0 || width > len {
            return Err(Error::dim(
                "conv1d",
                format!("kernel width {} exceeds input length {}", width, len),
            ));
        }
        let out_len = (len - width) / stride + 1;
        let xd = self.value(x).data();
        let kd = self.value(kernels).data();
        let mut out = vec![0.0; batch * c_out * out_len];
        for b in 0..batch {
            for o in 0..c_out {
                for t in 0..out_len {
                    let mut acc = 0.0;
                    for c in 0..c_in {
                        let xrow = &xd[(b * c_in + c) * len + t * stride..];
                        let krow = &kd[(o * c_in + c) * width..(o * c_in + c + 1) * width];
                        for j in 0..width {
                            acc += krow[j] * xrow[j];
                        }
                    }
                    out[(b * c_out + o) * out_len + t] = acc;
                }
            }
        }
        let shape = if sx.len() == 2 {
            vec![c_out, out_len]
        } else {
            vec![batch, c_out, out_len]
        };
        let rg = self.needs(x) || self.needs(kernels);
        self.push(
            "conv1d",
            Tensor::new(shape, out)?,
            Op::Conv1d { x, kernels, stride },
            rg,
        )
    }

    /// Normalises each slice along the last axis, then applies `gain` and `bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let n = *sx.last().unwrap_or(&0);
        if n == 0 || self.shape(gain) != [n] || self.shape(bias) != [n] {
            return Err(Error::dim(
                "layer_norm",
                format!(
                    "input {:?}, gain {:?}, bias {:?}",
                    sx,
                    self.shape(gain),
                    self.shape(bias)
                ),
            ));
        }
        let xd = self.value(x).data();
        let gd = self.value(gain).data();
        let bd = self.value(bias).data();
        let rows = xd.len() / n;
        let mut xhat = vec![0.0; xd.len()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; xd.len()];
        for r in 0..rows {
            let row = &xd[r * n..(r + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[r] = is;
            for i in 0..n {
                let h = (row[i] - mean) * is;
                xhat[r * n + i] = h;
                out[r * n + i] = h * gd[i] + bd[i];
            }
        }
        let rg = self.needs(x) || self.needs(gain) || self.needs(bias);
        self.push(
            "layer_norm",
            Tensor::new(sx, out)?,
            Op::LayerNorm { x, gain, bias, xhat, inv_std },
            rg,
        )
    }

    /// Inverted dropout in train mode; identity in eval mode or at rate 0.
    pub fn dropout(&mut self, x: Var, rate: f64, rng: &mut RngState) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {} not in [0, 1)", rate)));
        }
        if rate == 0.0 || self.mode == Mode::Eval {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..self.value(x).numel())
            .map(|_| if rng.bernoulli(rate) { 0.0 } else { keep })
            .collect();
        let tx = self.value(x);
        let data = tx.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let t = Tensor::new(tx.shape().to_vec(), data)?;
        let rg = self.needs(x);
        self.push("dropout", t, Op::Dropout { x, mask }, rg)
    }

    /// Sum or mean over one axis (removed from the shape) or over everything.
    pub fn reduce(&mut self, op: Reduce, x: Var, axis: Option<usize>) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let xd = self.value(x).data();
        let t = match axis {
            None => {
                let s: f64 = xd.iter().sum();
                let v = match op {
                    Reduce::Sum => s,
                    Reduce::Mean => s / xd.len().max(1) as f64,
                };
                if xd.is_empty() {
                    return Err(Error::dim("reduce", "empty tensor"));
                }
                Tensor::scalar(v)
            }
            Some(ax) => {
                if ax >= sx.len() {
                    return Err(Error::dim(
                        "reduce",
                        format!("axis {} out of range for {:?}", ax, sx),
                    ));
                }
                let (outer, len, inner) = split_axis(&sx, ax);
                let mut out = vec![0.0; outer * inner];
                for o in 0..outer {
                    for i in 0..len {
                        let base = (o * len + i) * inner;
                        for j in 0..inner {
                            out[o * inner + j] += xd[base + j];
                        }
                    }
                }
                if op == Reduce::Mean {
                    for v in &mut out {
                        *v /= len as f64;
                    }
                }
                let mut shape = sx.clone();
                shape.remove(ax);
                Tensor::new(shape, out)?
            }
        };
        let rg = self.needs(x);
        self.push("reduce", t, Op::Reduce { op, x, axis }, rg)
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.reduce(Reduce::Sum, x, None)
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        self.reduce(Reduce::Mean, x, None)
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = match inputs.first() {
            Some(&v) => self.shape(v).to_vec(),
            None => return Err(Error::dim("concat", "no inputs")),
        };
        if axis >= first.len() {
            return Err(Error::dim("concat", format!("axis {} for {:?}", axis, first)));
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == first.len()
                && s.iter().zip(&first).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::dim(
                    "concat",
                    format!("{:?} does not match {:?} off axis {}", s, first, axis),
                ));
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&first, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let t = self.value(v);
                let len = t.shape()[axis];
                data.extend_from_slice(&t.data()[o * len * inner..(o + 1) * len * inner]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        let rg = inputs.iter().any(|&v| self.needs(v));
        self.push(
            "concat",
            Tensor::new(shape, data)?,
            Op::Concat { inputs: inputs.to_vec(), axis },
            rg,
        )
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshaped(shape.to_vec())?;
        let rg = self.needs(x);
        self.push("reshape", t, Op::Reshape(x), rg)
    }

    /// Collapses every axis from `start_axis` on into one.
    pub fn flatten(&mut self, x: Var, start_axis: usize) -> Result<Var> {
        let s = self.shape(x);
        if start_axis > s.len() {
            return Err(Error::dim("flatten", format!("axis {} for {:?}", start_axis, s)));
        }
        let mut shape = s[..start_axis].to_vec();
        shape.push(s[start_axis..].iter().product());
        self.reshape(x, &shape)
    }

    /// Entries `start..end` along `axis`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        if axis >= sx.len() || start > end || end > sx[axis] {
            return Err(Error::dim(
                "slice",
                format!("range {}..{} on axis {} of {:?}", start, end, axis, sx),
            ));
        }
        let (outer, len, inner) = split_axis(&sx, axis);
        let xd = self.value(x).data();
        let mut data = Vec::with_capacity(outer * (end - start) * inner);
        for o in 0..outer {
            data.extend_from_slice(&xd[(o * len + start) * inner..(o * len + end) * inner]);
        }
        let mut shape = sx;
        shape[axis] = end - start;
        let rg = self.needs(x);
        self.push("slice", Tensor::new(shape, data)?, Op::Slice { x, axis, start }, rg)
    }

    /// Transposes the last two axes.
    pub fn swap_last(&mut self, x: Var) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let nd = sx.len();
        if nd < 2 {
            return Err(Error::dim("swap_last", format!("shape {:?}", sx)));
        }
        let (r, c) = (sx[nd - 2], sx[nd - 1]);
        let xd = self.value(x).data();
        let mut data = vec![0.0; xd.len()];
        for b in 0..xd.len() / (r * c).max(1) {
            let base = b * r * c;
            for i in 0..r {
                for j in 0..c {
                    data[base + j * r + i] = xd[base + i * c + j];
                }
            }
        }
        let mut shape = sx;
        shape.swap(nd - 2, nd - 1);
        let rg = self.needs(x);
        self.push("swap_last", Tensor::new(shape, data)?, Op::SwapLast(x), rg)
    }

    /// Reverse pass from a single-element `loss`. A graph can be
    /// differentiated once; later calls fail.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.grads.is_some() {
            return Err(Error::State("backward already ran on this graph".into()));
        }
        if self.value(loss).numel() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let mut out = Vec::with_capacity(self.nodes.len());
        for (node, g) in self.nodes.iter().zip(grads) {
            let t = match g {
                Some(g) if node.requires_grad => {
                    if g.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFinite { op: "backward" });
                    }
                    Some(Tensor::new(node.value.shape().to_vec(), g)?)
                }
                _ => None,
            };
            out.push(t);
        }
        self.grads = Some(out);
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let mut acc = |v: Var, f: &dyn Fn(&mut [f64])| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.numel()]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, n, p) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                let (ad, bd) = (ta.data(), tb.data());
                acc(*a, &|s| {
                    for i in 0..m {
                        for k in 0..n {
                            let mut sum = 0.0;
                            for j in 0..p {
                                sum += g[i * p + j] * bd[k * p + j];
                            }
                            s[i * n + k] += sum;
                        }
                    }
                });
                acc(*b, &|s| {
                    for i in 0..m {
                        for k in 0..n {
                            let aik = ad[i * n + k];
                            if aik == 0.0 {
                                continue;
                            }
                            for j in 0..p {
                                s[k * p + j] += aik * g[i * p + j];
                            }
                        }
                    }
                });
            }
            Op::Binary(op, a, b) => {
                let (da, db) = (self.value(*a).data(), self.value(*b).data());
                let pick = |d: &[f64], i: usize| if d.len() == 1 { d[0] } else { d[i] };
                let route = |s: &mut [f64], local: &dyn Fn(usize) -> f64| {
                    if s.len() == 1 && g.len() > 1 {
                        s[0] += (0..g.len()).map(|i| g[i] * local(i)).sum::<f64>();
                    } else {
                        for (i, v) in s.iter_mut().enumerate() {
                            *v += g[i] * local(i);
                        }
                    }
                };
                match op {
                    Binary::Add => {
                        acc(*a, &|s| route(s, &|_| 1.0));
                        acc(*b, &|s| route(s, &|_| 1.0));
                    }
                    Binary::Sub => {
                        acc(*a, &|s| route(s, &|_| 1.0));
                        acc(*b, &|s| route(s, &|_| -1.0));
                    }
                    Binary::Mul => {
                        acc(*a, &|s| route(s, &|i| pick(db, i)));
                        acc(*b, &|s| route(s, &|i| pick(da, i)));
                    }
                }
            }
            Op::AddBias { x, bias, axis } => {
                acc(*x, &|s| {
                    for (v, gi) in s.iter_mut().zip(g) {
                        *v += gi;
                    }
                });
                let (outer, len, inner) = split_axis(node.value.shape(), *axis);
                acc(*bias, &|s| {
                    for o in 0..outer {
                        for i in 0..len {
                            let base = (o * len + i) * inner;
                            s[i] += g[base..base + inner].iter().sum::<f64>();
                        }
                    }
                });
            }
            Op::Scale(x, c) => acc(*x, &|s| {
                for (v, gi) in s.iter_mut().zip(g) {
                    *v += gi * c;
                }
            }),
            Op::AddScalar(x) | Op::Reshape(x) => acc(*x, &|s| {
                for (v, gi) in s.iter_mut().zip(g) {
                    *v += gi;
                }
            }),
            Op::Unary(op, x) => {
                let xd = self.value(*x).data();
                let yd = node.value.data();
                acc(*x, &|s| {
                    for i in 0..s.len() {
                        let local = match op {
                            Unary::Relu => {
                                if xd[i] > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            Unary::Sigmoid => yd[i] * (1.0 - yd[i]),
                            Unary::Tanh => 1.0 - yd[i] * yd[i],
                            Unary::Log => 1.0 / xd[i],
                        };
                        s[i] += g[i] * local;
                    }
                });
            }
            Op::Clamp { x, lo, hi } => {
                let xd = self.value(*x).data();
                acc(*x, &|s| {
                    for i in 0..s.len() {
                        if xd[i] >= *lo && xd[i] <= *hi {
                            s[i] += g[i];
                        }
                    }
                });
            }
            Op::Conv1d { x, kernels, stride } => {
                let tx = self.value(*x);
                let tk = self.value(*kernels);
                let sx = tx.shape();
                let (batch, c_in, len) = if sx.len() == 2 {
                    (1, sx[0], sx[1])
                } else {
                    (sx[0], sx[1], sx[2])
                };
                let (c_out, width) = (tk.shape()[0], tk.shape()[2]);
                let out_len = (len - width) / stride + 1;
                let (xd, kd) = (tx.data(), tk.data());
                let stride = *stride;
                acc(*x, &|s| {
                    for b in 0..batch {
                        for o in 0..c_out {
                            for t in 0..out_len {
                                let go = g[(b * c_out + o) * out_len + t];
                                for c in 0..c_in {
                                    let base = (b * c_in + c) * len + t * stride;
                                    let kb = (o * c_in + c) * width;
                                    for j in 0..width {
                                        s[base + j] += go * kd[kb + j];
                                    }
                                }
                            }
                        }
                    }
                });
                acc(*kernels, &|s| {
                    for b in 0..batch {
                        for o in 0..c_out {
                            for t in 0..out_len {
                                let go = g[(b * c_out + o) * out_len + t];
                                for c in 0..c_in {
                                    let base = (b * c_in + c) * len + t * stride;
                                    let kb = (o * c_in + c) * width;
                                    for j in 0..width {
                                        s[kb + j] += go * xd[base + j];
                                    }
                                }
                            }
                        }
                    }
                });
            }
            Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                let n = self.value(*gain).numel();
                let gd = self.value(*gain).data();
                let rows = xhat.len() / n;
                acc(*x, &|s| {
                    for r in 0..rows {
                        let mut sum_d = 0.0;
                        let mut sum_dx = 0.0;
                        for i in 0..n {
                            let d = g[r * n + i] * gd[i];
                            sum_d += d;
                            sum_dx += d * xhat[r * n + i];
                        }
                        let k = inv_std[r] / n as f64;
                        for i in 0..n {
                            let d = g[r * n + i] * gd[i];
                            s[r * n + i] += k * (n as f64 * d - sum_d - xhat[r * n + i] * sum_dx);
                        }
                    }
                });
                acc(*gain, &|s| {
                    for r in 0..rows {
                        for i in 0..n {
                            s[i] += g[r * n + i] * xhat[r * n + i];
                        }
                    }
                });
                acc(*bias, &|s| {
                    for r in 0..rows {
                        for i in 0..n {
                            s[i] += g[r * n + i];
                        }
                    }
                });
            }
            Op::Dropout { x, mask } => acc(*x, &|s| {
                for i in 0..s.len() {
                    s[i] += g[i] * mask[i];
                }
            }),
            Op::Reduce { op, x, axis } => {
                let sx = self.value(*x).shape().to_vec();
                match axis {
                    None => {
                        let n = self.value(*x).numel();
                        let w = match op {
                            Reduce::Sum => g[0],
                            Reduce::Mean => g[0] / n as f64,
                        };
                        acc(*x, &|s| {
                            for v in s.iter_mut() {
                                *v += w;
                            }
                        });
                    }
                    Some(ax) => {
                        let (outer, len, inner) = split_axis(&sx, *ax);
                        let w = match op {
                            Reduce::Sum => 1.0,
                            Reduce::Mean => 1.0 / len as f64,
                        };
                        acc(*x, &|s| {
                            for o in 0..outer {
                                for i in 0..len {
                                    let base = (o * len + i) * inner;
                                    for j in 0..inner {
                                        s[base + j] += w * g[o * inner + j];
                                    }
                                }
                            }
                        });
                    }
                }
            }
            Op::Concat { inputs, axis } => {
                let (outer, total, inner) = split_axis(node.value.shape(), *axis);
                let mut offset = 0;
                for &v in inputs {
                    let len = self.value(v).shape()[*axis];
                    acc(v, &|s| {
                        for o in 0..outer {
                            let src = (o * total + offset) * inner;
                            let dst = o * len * inner;
                            for j in 0..len * inner {
                                s[dst + j] += g[src + j];
                            }
                        }
                    });
                    offset += len;
                }
            }
            Op::Slice { x, axis, start } => {
                let sx = self.value(*x).shape().to_vec();
                let (outer, len, inner) = split_axis(&sx, *axis);
                let width = node.value.shape()[*axis];
                acc(*x, &|s| {
                    for o in 0..outer {
                        let dst = (o * len + start) * inner;
                        let src = o * width * inner;
                        for j in 0..width * inner {
                            s[dst + j] += g[src + j];
                        }
                    }
                });
            }
            Op::SwapLast(x) => {
                let so = node.value.shape();
                let nd = so.len();
                // output is [.., c, r]; input is [.., r, c]
                let (c, r) = (so[nd - 2], so[nd - 1]);
                acc(*x, &|s| {
                    for b in 0..s.len() / (r * c).max(1) {
                        let base = b * r * c;
                        for i in 0..r {
                            for j in 0..c {
                                s[base + i * c + j] += g[base + j * r + i];
                            }
                        }
                    }
                });
            }
        }
    }

    /// Gradient of `v` after [`Graph::backward`].
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.as_ref()?.get(v.0)?.as_ref()
    }

    /// Gradient of a bound parameter; `None` if it was never bound, is
    /// frozen, or backward has not run.
    pub fn param_grad(&self, p: &Param) -> Option<&Tensor> {
        let v = self.params.get(&p.id())?;
        self.grad(*v)
    }

    /// Gradients for every parameter of `module` in declaration order,
    /// zero-filled where the parameter received none.
    pub fn module_grads(&self, module: &dyn Module) -> Vec<Tensor> {
        module
            .parameters()
            .into_iter()
            .map(|p| {
                self.param_grad(p)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(p.shape()))
            })
            .collect()
    }
}
