//! Define-by-run tape. Node ids are topologically ordered by construction;
//! the backward pass walks them once in reverse.

use super::{matmul, mm_a_bt_into, mm_at_b_into, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::math;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

const LAYERNORM_EPS: f64 = 1e-12;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param { slot: usize },
    Matmul { a: usize, b: usize },
    Add { a: usize, b: usize, broadcast_row: bool },
    Mul { a: usize, b: usize },
    DivColVec { a: usize, s: usize },
    Gelu { a: usize },
    Relu { a: usize },
    SoftmaxLastDim { a: usize },
    LayerNorm { a: usize, gain: usize, bias: usize },
    Transpose { a: usize },
    Scale { a: usize, factor: f64 },
    Sum { a: usize },
    Mean { a: usize },
    SliceRows { a: usize, start: usize, end: usize },
    SliceCols { a: usize, start: usize, end: usize },
    ConcatCols { parts: Vec<usize> },
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Recorded forward computation over tensors.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value of a node (the forward result recorded at construction).
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Record a constant input (receives no gradient).
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Input, value)
    }

    /// Record a parameter leaf bound to a store slot.
    pub fn param(&mut self, store: &ParamStore, slot: usize) -> NodeId {
        self.push(Op::Param { slot }, store.tensor(slot))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = matmul(self.value(a), self.value(b))?;
        Ok(self.push(Op::Matmul { a: a.0, b: b.0 }, v))
    }

    /// Elementwise add; `b` may also be a `1 x C` row broadcast against an
    /// `R x C` left operand.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() == vb.shape() {
            let mut out = va.clone();
            for (o, x) in out.data_mut().iter_mut().zip(vb.data()) {
                *o += x;
            }
            Ok(self.push(Op::Add { a: a.0, b: b.0, broadcast_row: false }, out))
        } else if vb.rows() == 1 && vb.cols() == va.cols() {
            let cols = va.cols();
            let mut out = va.clone();
            for (i, o) in out.data_mut().iter_mut().enumerate() {
                *o += vb.data()[i % cols];
            }
            Ok(self.push(Op::Add { a: a.0, b: b.0, broadcast_row: true }, out))
        } else {
            Err(Error::ShapeMismatch {
                op: "add",
                detail: format!("{:?} + {:?}", va.shape(), vb.shape()),
            })
        }
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::ShapeMismatch {
                op: "mul",
                detail: format!("{:?} * {:?}", va.shape(), vb.shape()),
            });
        }
        let mut out = va.clone();
        for (o, x) in out.data_mut().iter_mut().zip(vb.data()) {
            *o *= x;
        }
        Ok(self.push(Op::Mul { a: a.0, b: b.0 }, out))
    }

    /// Divide each row of `a` (R x C) by the matching entry of the column
    /// vector `s` (R x 1).
    pub fn div_colvec(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        let (va, vs) = (self.value(a), self.value(s));
        if vs.cols() != 1 || vs.rows() != va.rows() {
            return Err(Error::ShapeMismatch {
                op: "div_colvec",
                detail: format!("{:?} / {:?}", va.shape(), vs.shape()),
            });
        }
        let cols = va.cols();
        let mut out = va.clone();
        for r in 0..va.rows() {
            let d = vs.data()[r];
            for v in &mut out.data_mut()[r * cols..(r + 1) * cols] {
                *v /= d;
            }
        }
        Ok(self.push(Op::DivColVec { a: a.0, s: s.0 }, out))
    }

    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let mut out = self.value(a).clone();
        for v in out.data_mut() {
            *v = gelu(*v);
        }
        self.push(Op::Gelu { a: a.0 }, out)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let mut out = self.value(a).clone();
        for v in out.data_mut() {
            *v = v.max(0.0);
        }
        self.push(Op::Relu { a: a.0 }, out)
    }

    /// Row-wise softmax over the last dimension.
    pub fn softmax_lastdim(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        let (rows, cols) = (va.rows(), va.cols());
        let mut out = va.clone();
        for r in 0..rows {
            softmax_row(&mut out.data_mut()[r * cols..(r + 1) * cols]);
        }
        self.push(Op::SoftmaxLastDim { a: a.0 }, out)
    }

    /// Row-wise layer normalization (population variance) with affine
    /// gain/bias, both `1 x C`.
    pub fn layernorm_lastdim(&mut self, a: NodeId, gain: NodeId, bias: NodeId) -> Result<NodeId> {
        let (va, vg, vb) = (self.value(a), self.value(gain), self.value(bias));
        let cols = va.cols();
        if vg.len() != cols || vb.len() != cols {
            return Err(Error::ShapeMismatch {
                op: "layernorm_lastdim",
                detail: format!("x {:?}, gain {:?}, bias {:?}", va.shape(), vg.shape(), vb.shape()),
            });
        }
        let rows = va.rows();
        let mut out = va.clone();
        for r in 0..rows {
            let row = &mut out.data_mut()[r * cols..(r + 1) * cols];
            let (mean, inv_std) = row_stats(row);
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - mean) * inv_std * vg.data()[j] + vb.data()[j];
            }
        }
        Ok(self.push(Op::LayerNorm { a: a.0, gain: gain.0, bias: bias.0 }, out))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).transposed();
        self.push(Op::Transpose { a: a.0 }, out)
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let mut out = self.value(a).clone();
        for v in out.data_mut() {
            *v *= factor;
        }
        self.push(Op::Scale { a: a.0, factor }, out)
    }

    /// Sum of all entries (scalar node).
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.value(a).data().iter().sum();
        self.push(Op::Sum { a: a.0 }, Tensor::scalar(s))
    }

    /// Mean of all entries (scalar node).
    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        let s: f64 = va.data().iter().sum();
        let n = va.len() as f64;
        self.push(Op::Mean { a: a.0 }, Tensor::scalar(s / n))
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let va = self.value(a);
        if start >= end || end > va.rows() {
            return Err(Error::ShapeMismatch {
                op: "slice_rows",
                detail: format!("rows {start}..{end} of {:?}", va.shape()),
            });
        }
        let cols = va.cols();
        let data = va.data()[start * cols..end * cols].to_vec();
        let out = Tensor::matrix(end - start, cols, data)?;
        Ok(self.push(Op::SliceRows { a: a.0, start, end }, out))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let va = self.value(a);
        if start >= end || end > va.cols() {
            return Err(Error::ShapeMismatch {
                op: "slice_cols",
                detail: format!("cols {start}..{end} of {:?}", va.shape()),
            });
        }
        let (rows, cols) = (va.rows(), va.cols());
        let w = end - start;
        let mut data = Vec::with_capacity(rows * w);
        for r in 0..rows {
            data.extend_from_slice(&va.data()[r * cols + start..r * cols + end]);
        }
        let out = Tensor::matrix(rows, w, data)?;
        Ok(self.push(Op::SliceCols { a: a.0, start, end }, out))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::ShapeMismatch { op: "concat_cols", detail: format!("no parts") });
        }
        let rows = self.value(parts[0]).rows();
        let mut total = 0;
        for &p in parts {
            let v = self.value(p);
            if v.rows() != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    detail: format!("row counts differ: {} vs {}", rows, v.rows()),
                });
            }
            total += v.cols();
        }
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                let v = self.value(p);
                data.extend_from_slice(v.row(r));
            }
        }
        let out = Tensor::matrix(rows, total, data)?;
        Ok(self.push(Op::ConcatCols { parts: parts.iter().map(|p| p.0).collect() }, out))
    }

    /// Reverse pass from a scalar loss node; returns the gradient aligned
    /// with the store's flat parameter vector. Parameters not reachable from
    /// the loss keep a zero gradient.
    pub fn backward(&self, loss: NodeId, store: &ParamStore) -> Result<Vec<f64>> {
        if !self.value(loss).is_scalar() {
            return Err(Error::NotScalar { op: "backward" });
        }
        self.backward_from(loss, Tensor::scalar(1.0), store)
    }

    /// Reverse pass seeded with `dL/d(node)`; the seed must match the node's
    /// shape. Used to chain analytic loss gradients into the network.
    pub fn backward_from(&self, node: NodeId, seed: Tensor, store: &ParamStore) -> Result<Vec<f64>> {
        if seed.shape() != self.value(node).shape() {
            return Err(Error::ShapeMismatch {
                op: "backward_from",
                detail: format!("seed {:?} vs node {:?}", seed.shape(), self.value(node).shape()),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[node.0] = Some(seed);
        let mut flat = vec![0.0; store.len()];

        for i in (0..=node.0).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[i].op {
                Op::Input => {}
                Op::Param { slot } => {
                    let (offset, _) = store.slot_span(*slot);
                    for (k, v) in g.data().iter().enumerate() {
                        flat[offset + k] += v;
                    }
                }
                Op::Matmul { a, b } => {
                    let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let (m, k, n) = (va.rows(), va.cols(), vb.cols());
                    {
                        let ga = grads[*a].get_or_insert_with(|| Tensor::zeros(va.shape()));
                        mm_a_bt_into(g.data(), vb.data(), ga.data_mut(), m, n, k);
                    }
                    {
                        let gb = grads[*b].get_or_insert_with(|| Tensor::zeros(vb.shape()));
                        mm_at_b_into(va.data(), g.data(), gb.data_mut(), m, k, n);
                    }
                }
                Op::Add { a, b, broadcast_row } => {
                    accumulate(&mut grads, *a, g.data(), self.nodes[*a].value.shape());
                    if *broadcast_row {
                        let cols = self.nodes[*b].value.cols();
                        let gb =
                            grads[*b].get_or_insert_with(|| Tensor::zeros(&[1, cols]));
                        for (k, v) in g.data().iter().enumerate() {
                            gb.data_mut()[k % cols] += v;
                        }
                    } else {
                        accumulate(&mut grads, *b, g.data(), self.nodes[*b].value.shape());
                    }
                }
                Op::Mul { a, b } => {
                    let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    {
                        let ga = grads[*a].get_or_insert_with(|| Tensor::zeros(va.shape()));
                        for ((o, gv), bv) in ga.data_mut().iter_mut().zip(g.data()).zip(vb.data()) {
                            *o += gv * bv;
                        }
                    }
                    {
                        let gb = grads[*b].get_or_insert_with(|| Tensor::zeros(vb.shape()));
                        for ((o, gv), av) in gb.data_mut().iter_mut().zip(g.data()).zip(va.data()) {
                            *o += gv * av;
                        }
                    }
                }
                Op::DivColVec { a, s } => {
                    let (va, vs) = (&self.nodes[*a].value, &self.nodes[*s].value);
                    let (rows, cols) = (va.rows(), va.cols());
                    {
                        let ga = grads[*a].get_or_insert_with(|| Tensor::zeros(va.shape()));
                        for r in 0..rows {
                            let d = vs.data()[r];
                            for c in 0..cols {
                                ga.data_mut()[r * cols + c] += g.data()[r * cols + c] / d;
                            }
                        }
                    }
                    {
                        let gs = grads[*s].get_or_insert_with(|| Tensor::zeros(vs.shape()));
                        for r in 0..rows {
                            let d = vs.data()[r];
                            let mut acc = 0.0;
                            for c in 0..cols {
                                acc += g.data()[r * cols + c] * va.data()[r * cols + c];
                            }
                            gs.data_mut()[r] -= acc / (d * d);
                        }
                    }
                }
                Op::Gelu { a } => {
                    let va = &self.nodes[*a].value;
                    let ga = grads[*a].get_or_insert_with(|| Tensor::zeros(va.shape()));
                    for ((o, gv), x) in ga.data_mut().iter_mut().zip(g.data()).zip(va.data()) {
                        *o += gv * gelu_grad(*x);
                    }
                }
                Op::Relu { a } => {
                    let va = &self.nodes[*a].value;
                    let ga = grads[*a].get_or_insert_with(|| Tensor::zeros(va.shape()));
                    for ((o, gv), x) in ga.data_mut().iter_mut().zip(g.data()).zip(va.data()) {
                        if *x > 0.0 {
                            *o += gv;
                        }
                    }
                }
                Op::SoftmaxLastDim { a } => {
                    let y = &self.nodes[i].value;
                    let (rows, cols) = (y.rows(), y.cols());
                    let va = &self.nodes[*a].value;
                    let ga = grads[*a].get_or_insert_with(|| Tensor::zeros(va.shape()));
                    for r in 0..rows {
                        let yr = &y.data()[r * cols..(r + 1) * cols];
                        let gr = &g.data()[r * cols..(r + 1) * cols];
                        let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                        let out = &mut ga.data_mut()[r * cols..(r + 1) * cols];
                        for c in 0..cols {
                            out[c] += yr[c] * (gr[c] - dot);
                        }
                    }
                }
                Op::LayerNorm { a, gain, bias } => {
                    let va = &self.nodes[*a].value;
                    let vg = &self.nodes[*gain].value;
                    let (rows, cols) = (va.rows(), va.cols());
                    let nf = cols as f64;
                    let mut ga_buf = Tensor::zeros(va.shape());
                    let mut gg_buf = Tensor::zeros(&[1, cols]);
                    let mut gb_buf = Tensor::zeros(&[1, cols]);
                    for r in 0..rows {
                        let xr = &va.data()[r * cols..(r + 1) * cols];
                        let gr = &g.data()[r * cols..(r + 1) * cols];
                        let (mean, inv_std) = row_stats(xr);
                        // xhat, d(loss)/d(xhat), and the two reduction terms
                        let mut sum_dxhat = 0.0;
                        let mut sum_dxhat_xhat = 0.0;
                        for c in 0..cols {
                            let xhat = (xr[c] - mean) * inv_std;
                            let dxhat = gr[c] * vg.data()[c];
                            sum_dxhat += dxhat;
                            sum_dxhat_xhat += dxhat * xhat;
                            gg_buf.data_mut()[c] += gr[c] * xhat;
                            gb_buf.data_mut()[c] += gr[c];
                        }
                        let out = &mut ga_buf.data_mut()[r * cols..(r + 1) * cols];
                        for c in 0..cols {
                            let xhat = (xr[c] - mean) * inv_std;
                            let dxhat = gr[c] * vg.data()[c];
                            out[c] +=
                                inv_std * (dxhat - sum_dxhat / nf - xhat * sum_dxhat_xhat / nf);
                        }
                    }
                    add_tensor(&mut grads, *a, ga_buf);
                    add_tensor(&mut grads, *gain, gg_buf);
                    add_tensor(&mut grads, *bias, gb_buf);
                }
                Op::Transpose { a } => {
                    let gt = g.transposed();
                    add_tensor(&mut grads, *a, gt);
                }
                Op::Scale { a, factor } => {
                    let va = &self.nodes[*a].value;
                    let ga = grads[*a].get_or_insert_with(|| Tensor::zeros(va.shape()));
                    for (o, gv) in ga.data_mut().iter_mut().zip(g.data()) {
                        *o += gv * factor;
                    }
                }
                Op::Sum { a } => {
                    let va = &self.nodes[*a].value;
                    let gv = g.data()[0];
                    let ga = grads[*a].get_or_insert_with(|| Tensor::zeros(va.shape()));
                    for o in ga.data_mut() {
                        *o += gv;
                    }
                }
                Op::Mean { a } => {
                    let va = &self.nodes[*a].value;
                    let gv = g.data()[0] / va.len() as f64;
                    let ga = grads[*a].get_or_insert_with(|| Tensor::zeros(va.shape()));
                    for o in ga.data_mut() {
                        *o += gv;
                    }
                }
                Op::SliceRows { a, start, end } => {
                    let va = &self.nodes[*a].value;
                    let cols = va.cols();
                    debug_assert_eq!(g.rows(), end - start);
                    let ga = grads[*a].get_or_insert_with(|| Tensor::zeros(va.shape()));
                    for (k, v) in g.data().iter().enumerate() {
                        ga.data_mut()[start * cols + k] += v;
                    }
                }
                Op::SliceCols { a, start, end } => {
                    let va = &self.nodes[*a].value;
                    let cols = va.cols();
                    let w = end - start;
                    let ga = grads[*a].get_or_insert_with(|| Tensor::zeros(va.shape()));
                    for r in 0..va.rows() {
                        for c in 0..w {
                            ga.data_mut()[r * cols + start + c] += g.data()[r * w + c];
                        }
                    }
                }
                Op::ConcatCols { parts } => {
                    let rows = self.nodes[i].value.rows();
                    let total = self.nodes[i].value.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let vp = &self.nodes[p].value;
                        let w = vp.cols();
                        let gp = grads[p].get_or_insert_with(|| Tensor::zeros(vp.shape()));
                        for r in 0..rows {
                            for c in 0..w {
                                gp.data_mut()[r * w + c] += g.data()[r * total + offset + c];
                            }
                        }
                        offset += w;
                    }
                }
            }
        }
        let _ = grads;
        Ok(flat)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], target: usize, g: &[f64], shape: &[usize]) {
    let t = grads[target].get_or_insert_with(|| Tensor::zeros(shape));
    for (o, v) in t.data_mut().iter_mut().zip(g) {
        *o += v;
    }
}

fn add_tensor(grads: &mut [Option<Tensor>], target: usize, g: Tensor) {
    match &mut grads[target] {
        Some(t) => {
            for (o, v) in t.data_mut().iter_mut().zip(g.data()) {
                *o += v;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

#[inline]
fn row_stats(row: &[f64]) -> (f64, f64) {
    let n = row.len() as f64;
    let mean: f64 = row.iter().sum::<f64>() / n;
    let var: f64 = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, 1.0 / math::sqrt(var + LAYERNORM_EPS))
}

#[inline]
fn softmax_row(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = math::exp(*v - max);
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

#[inline]
pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + math::erf(x * core::f64::consts::FRAC_1_SQRT_2))
}

#[inline]
fn gelu_grad(x: f64) -> f64 {
    0.5 * (1.0 + math::erf(x * core::f64::consts::FRAC_1_SQRT_2))
        + x * FRAC_1_SQRT_2PI * math::exp(-0.5 * x * x)
}

/// Primitive op kinds accepted by [`primitive_forward`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpKind {
    Matmul,
    Add,
    Mul,
    Gelu,
    Relu,
    SoftmaxLastDim,
    LayerNormLastDim,
    Transpose,
    Scale(f64),
    Sum,
    Mean,
    SliceRows(usize, usize),
}

/// Dispatching front door over the tape methods; shape errors name the op.
pub fn primitive_forward(tape: &mut Tape, kind: OpKind, inputs: &[NodeId]) -> Result<NodeId> {
    let need = |n: usize| -> Result<()> {
        if inputs.len() != n {
            Err(Error::ShapeMismatch {
                op: "primitive_forward",
                detail: format!("{kind:?} expects {n} inputs, got {}", inputs.len()),
            })
        } else {
            Ok(())
        }
    };
    match kind {
        OpKind::Matmul => {
            need(2)?;
            tape.matmul(inputs[0], inputs[1])
        }
        OpKind::Add => {
            need(2)?;
            tape.add(inputs[0], inputs[1])
        }
        OpKind::Mul => {
            need(2)?;
            tape.mul(inputs[0], inputs[1])
        }
        OpKind::Gelu => {
            need(1)?;
            Ok(tape.gelu(inputs[0]))
        }
        OpKind::Relu => {
            need(1)?;
            Ok(tape.relu(inputs[0]))
        }
        OpKind::SoftmaxLastDim => {
            need(1)?;
            Ok(tape.softmax_lastdim(inputs[0]))
        }
        OpKind::LayerNormLastDim => {
            need(3)?;
            tape.layernorm_lastdim(inputs[0], inputs[1], inputs[2])
        }
        OpKind::Transpose => {
            need(1)?;
            Ok(tape.transpose(inputs[0]))
        }
        OpKind::Scale(f) => {
            need(1)?;
            Ok(tape.scale(inputs[0], f))
        }
        OpKind::Sum => {
            need(1)?;
            Ok(tape.sum(inputs[0]))
        }
        OpKind::Mean => {
            need(1)?;
            Ok(tape.mean(inputs[0]))
        }
        OpKind::SliceRows(s, e) => {
            need(1)?;
            tape.slice_rows(inputs[0], s, e)
        }
    }
}
