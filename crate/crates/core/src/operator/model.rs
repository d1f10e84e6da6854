//! Parameter layout and tape-built forward pass.

use super::TransolverConfig;
use crate::error::{Error, Result};
use crate::math;
use crate::tensor::{NodeId, ParamStore, Tape, Tensor};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// Register all operator parameters on a fresh store. Weights and biases are
/// uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]; LayerNorm affine starts at
/// identity.
pub fn register_params(config: &TransolverConfig, seed: u64) -> Result<ParamStore> {
    config.validate()?;
    let c = config.channels;
    let dh = config.head_dim();
    let s = config.num_tokens;
    let mut store = ParamStore::new(seed);
    let linear = |st: &mut ParamStore, name: String, rows: usize, cols: usize| {
        st.add_uniform(&format!("{name}.w"), &[rows, cols], rows);
        st.add_uniform(&format!("{name}.b"), &[1, cols], rows);
    };
    linear(&mut store, "embed.fc1".into(), config.in_features, c);
    linear(&mut store, "embed.fc2".into(), c, c);
    store.add_const("embed.ln.g", &[1, c], 1.0);
    store.add_const("embed.ln.b", &[1, c], 0.0);
    for l in 0..config.num_layers {
        store.add_const(&format!("layer{l}.ln1.g"), &[1, c], 1.0);
        store.add_const(&format!("layer{l}.ln1.b"), &[1, c], 0.0);
        linear(&mut store, format!("layer{l}.attn.proj_x"), c, c);
        linear(&mut store, format!("layer{l}.attn.proj_u"), c, c);
        for h in 0..config.heads {
            linear(&mut store, format!("layer{l}.attn.h{h}.slice"), dh, s);
            linear(&mut store, format!("layer{l}.attn.h{h}.q"), dh, dh);
            linear(&mut store, format!("layer{l}.attn.h{h}.k"), dh, dh);
            linear(&mut store, format!("layer{l}.attn.h{h}.v"), dh, dh);
        }
        linear(&mut store, format!("layer{l}.attn.out"), c, c);
        store.add_const(&format!("layer{l}.ln2.g"), &[1, c], 1.0);
        store.add_const(&format!("layer{l}.ln2.b"), &[1, c], 0.0);
        linear(&mut store, format!("layer{l}.mlp.fc1"), c, config.mlp_ratio * c);
        linear(&mut store, format!("layer{l}.mlp.fc2"), config.mlp_ratio * c, c);
    }
    linear(&mut store, "decode.fc1".into(), c, c);
    linear(&mut store, "decode.fc2".into(), c, config.out_features);
    Ok(store)
}

/// Node ids captured per physics-attention layer (canonical point order).
#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub m_heads: Vec<NodeId>,
    pub u_heads: Vec<NodeId>,
    pub z_heads: Vec<NodeId>,
    pub zt_heads: Vec<NodeId>,
    /// Deslice output after the head concat + out projection.
    pub attn_out: NodeId,
    /// Layer output after both residual additions.
    pub output: NodeId,
}

/// The slice / token / deslice tensors of one layer, cloned out of the tape.
#[derive(Debug, Clone)]
pub struct PhysicsAttentionState {
    pub m: Vec<Tensor>,
    pub u: Vec<Tensor>,
    pub z: Vec<Tensor>,
    pub zt: Vec<Tensor>,
    pub xt: Tensor,
}

/// A completed forward pass: the tape (canonical point order), the output in
/// the caller's original point order, and the permutation binding the two.
pub struct OperatorRun {
    pub tape: Tape,
    pub output_node: NodeId,
    pub embed_node: NodeId,
    pub layers: Vec<LayerTrace>,
    output_original: Tensor,
    /// canonical row i holds original row perm[i]
    perm: Vec<usize>,
}

impl OperatorRun {
    /// Prediction in the original point order.
    pub fn output(&self) -> &Tensor {
        &self.output_original
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Chain an output-space gradient (original point order) back to the
    /// flat parameter gradient.
    pub fn backward_params(&self, grad_original: &Tensor, store: &ParamStore) -> Result<Vec<f64>> {
        if grad_original.shape() != self.output_original.shape() {
            return Err(Error::ShapeMismatch {
                op: "backward_params",
                detail: format!(
                    "gradient {:?} vs output {:?}",
                    grad_original.shape(),
                    self.output_original.shape()
                ),
            });
        }
        let cols = grad_original.cols();
        let mut seed = Tensor::zeros(grad_original.shape());
        for (ci, &oi) in self.perm.iter().enumerate() {
            for c in 0..cols {
                seed.set(ci, c, grad_original.at(oi, c));
            }
        }
        self.tape.backward_from(self.output_node, seed, store)
    }

    /// Attention state of one layer, rows mapped back to original order
    /// where the tensor is per-point (M, U, Xt).
    pub fn attention_state(&self, layer: usize) -> PhysicsAttentionState {
        let tr = &self.layers[layer];
        let unperm = |t: &Tensor| {
            let mut out = Tensor::zeros(t.shape());
            for (ci, &oi) in self.perm.iter().enumerate() {
                for c in 0..t.cols() {
                    out.set(oi, c, t.at(ci, c));
                }
            }
            out
        };
        PhysicsAttentionState {
            m: tr.m_heads.iter().map(|&id| unperm(self.tape.value(id))).collect(),
            u: tr.u_heads.iter().map(|&id| unperm(self.tape.value(id))).collect(),
            z: tr.z_heads.iter().map(|&id| self.tape.value(id).clone()).collect(),
            zt: tr.zt_heads.iter().map(|&id| self.tape.value(id).clone()).collect(),
            xt: unperm(self.tape.value(tr.attn_out)),
        }
    }
}

/// Canonical point order: lexicographic over feature rows with total_cmp.
/// Exact duplicate rows are interchangeable, so ties keep index order.
fn canonical_perm(features: &Tensor) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..features.rows()).collect();
    perm.sort_by(|&a, &b| {
        let (ra, rb) = (features.row(a), features.row(b));
        for (x, y) in ra.iter().zip(rb) {
            match x.total_cmp(y) {
                core::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        core::cmp::Ordering::Equal
    });
    perm
}

struct Linear {
    w: NodeId,
    b: NodeId,
}

fn load_linear(tape: &mut Tape, store: &ParamStore, name: &str) -> Result<Linear> {
    let w = store
        .slot(&format!("{name}.w"))
        .ok_or_else(|| Error::Invalid(format!("missing parameter {name}.w")))?;
    let b = store
        .slot(&format!("{name}.b"))
        .ok_or_else(|| Error::Invalid(format!("missing parameter {name}.b")))?;
    Ok(Linear { w: tape.param(store, w), b: tape.param(store, b) })
}

fn apply_linear(tape: &mut Tape, x: NodeId, lin: &Linear) -> Result<NodeId> {
    let y = tape.matmul(x, lin.w)?;
    tape.add(y, lin.b)
}

fn load_ln(tape: &mut Tape, store: &ParamStore, name: &str) -> Result<(NodeId, NodeId)> {
    let g = store
        .slot(&format!("{name}.g"))
        .ok_or_else(|| Error::Invalid(format!("missing parameter {name}.g")))?;
    let b = store
        .slot(&format!("{name}.b"))
        .ok_or_else(|| Error::Invalid(format!("missing parameter {name}.b")))?;
    Ok((tape.param(store, g), tape.param(store, b)))
}

/// Build one physics-attention block on the tape (input in canonical order).
fn build_attention(
    tape: &mut Tape,
    store: &ParamStore,
    config: &TransolverConfig,
    layer: usize,
    xn: NodeId,
    ones: NodeId,
) -> Result<(NodeId, LayerTrace)> {
    let dh = config.head_dim();
    let scale = 1.0 / math::sqrt(dh as f64);
    let proj_x = load_linear(tape, store, &format!("layer{layer}.attn.proj_x"))?;
    let proj_u = load_linear(tape, store, &format!("layer{layer}.attn.proj_u"))?;
    let x_mid = apply_linear(tape, xn, &proj_x)?;
    let u_all = apply_linear(tape, xn, &proj_u)?;
    let mut heads = Vec::with_capacity(config.heads);
    let mut m_heads = Vec::new();
    let mut u_heads = Vec::new();
    let mut z_heads = Vec::new();
    let mut zt_heads = Vec::new();
    for h in 0..config.heads {
        let xh = tape.slice_cols(x_mid, h * dh, (h + 1) * dh)?;
        let uh = tape.slice_cols(u_all, h * dh, (h + 1) * dh)?;
        let slice = load_linear(tape, store, &format!("layer{layer}.attn.h{h}.slice"))?;
        let logits = apply_linear(tape, xh, &slice)?;
        let m = tape.softmax_lastdim(logits);
        let mt = tape.transpose(m);
        let colsum = tape.matmul(mt, ones)?;
        let mtu = tape.matmul(mt, uh)?;
        let z = tape.div_colvec(mtu, colsum)?;
        let q_l = load_linear(tape, store, &format!("layer{layer}.attn.h{h}.q"))?;
        let k_l = load_linear(tape, store, &format!("layer{layer}.attn.h{h}.k"))?;
        let v_l = load_linear(tape, store, &format!("layer{layer}.attn.h{h}.v"))?;
        let q = apply_linear(tape, z, &q_l)?;
        let k = apply_linear(tape, z, &k_l)?;
        let v = apply_linear(tape, z, &v_l)?;
        let kt = tape.transpose(k);
        let qk = tape.matmul(q, kt)?;
        let qk = tape.scale(qk, scale);
        let attn = tape.softmax_lastdim(qk);
        let zt = tape.matmul(attn, v)?;
        let out_h = tape.matmul(m, zt)?;
        heads.push(out_h);
        m_heads.push(m);
        u_heads.push(uh);
        z_heads.push(z);
        zt_heads.push(zt);
    }
    let cat = tape.concat_cols(&heads)?;
    let out = load_linear(tape, store, &format!("layer{layer}.attn.out"))?;
    let attn_out = apply_linear(tape, cat, &out)?;
    let trace = LayerTrace { m_heads, u_heads, z_heads, zt_heads, attn_out, output: attn_out };
    Ok((attn_out, trace))
}

/// Full forward pass. `features` is N x in_features in the caller's point
/// order; the run returns outputs in that order and exposes the tape for
/// backward passes.
pub fn forward(
    features: &Tensor,
    store: &ParamStore,
    config: &TransolverConfig,
) -> Result<OperatorRun> {
    config.validate()?;
    if features.cols() != config.in_features {
        return Err(Error::ShapeMismatch {
            op: "operator_forward",
            detail: format!(
                "features {:?} vs in_features {}",
                features.shape(),
                config.in_features
            ),
        });
    }
    if !features.all_finite() {
        return Err(Error::NonFinite { what: "input features".into() });
    }
    let n = features.rows();
    let perm = canonical_perm(features);
    let mut canon = Tensor::zeros(&[n, features.cols()]);
    for (ci, &oi) in perm.iter().enumerate() {
        for c in 0..features.cols() {
            canon.set(ci, c, features.at(oi, c));
        }
    }

    let mut tape = Tape::new();
    let x_in = tape.input(canon);
    let ones = tape.input(Tensor::filled(&[n, 1], 1.0));

    let fc1 = load_linear(&mut tape, store, "embed.fc1")?;
    let fc2 = load_linear(&mut tape, store, "embed.fc2")?;
    let (ln_g, ln_b) = load_ln(&mut tape, store, "embed.ln")?;
    let h = apply_linear(&mut tape, x_in, &fc1)?;
    let h = tape.gelu(h);
    let h = apply_linear(&mut tape, h, &fc2)?;
    let embed_node = tape.layernorm_lastdim(h, ln_g, ln_b)?;
    if !tape.value(embed_node).all_finite() {
        return Err(Error::NonFinite { what: "embedding output".into() });
    }

    let mut x = embed_node;
    let mut layers = Vec::with_capacity(config.num_layers);
    for l in 0..config.num_layers {
        let (g1, b1) = load_ln(&mut tape, store, &format!("layer{l}.ln1"))?;
        let xn = tape.layernorm_lastdim(x, g1, b1)?;
        let (attn, mut trace) = build_attention(&mut tape, store, config, l, xn, ones)?;
        let x1 = tape.add(x, attn)?;
        let (g2, b2) = load_ln(&mut tape, store, &format!("layer{l}.ln2"))?;
        let xn2 = tape.layernorm_lastdim(x1, g2, b2)?;
        let fc1 = load_linear(&mut tape, store, &format!("layer{l}.mlp.fc1"))?;
        let fc2 = load_linear(&mut tape, store, &format!("layer{l}.mlp.fc2"))?;
        let m = apply_linear(&mut tape, xn2, &fc1)?;
        let m = tape.gelu(m);
        let m = apply_linear(&mut tape, m, &fc2)?;
        let x2 = tape.add(x1, m)?;
        if !tape.value(x2).all_finite() {
            return Err(Error::NonFinite { what: format!("layer {l} output") });
        }
        trace.output = x2;
        layers.push(trace);
        x = x2;
    }

    let dfc1 = load_linear(&mut tape, store, "decode.fc1")?;
    let dfc2 = load_linear(&mut tape, store, "decode.fc2")?;
    let d = apply_linear(&mut tape, x, &dfc1)?;
    let d = tape.gelu(d);
    let output_node = apply_linear(&mut tape, d, &dfc2)?;
    let out_canon = tape.value(output_node);
    if !out_canon.all_finite() {
        return Err(Error::NonFinite { what: "decoder output".into() });
    }
    let mut output_original = Tensor::zeros(out_canon.shape());
    for (ci, &oi) in perm.iter().enumerate() {
        for c in 0..out_canon.cols() {
            output_original.set(oi, c, out_canon.at(ci, c));
        }
    }
    Ok(OperatorRun { tape, output_node, embed_node, layers, output_original, perm })
}

/// Prediction only (original point order).
pub fn predict(
    features: &Tensor,
    store: &ParamStore,
    config: &TransolverConfig,
) -> Result<Tensor> {
    Ok(forward(features, store, config)?.output().clone())
}

/// One physics-attention block applied to raw N x C features, with the same
/// canonicalization contract as the full forward pass. Returns the block
/// output in the caller's row order.
pub fn physics_attention(
    x: &Tensor,
    store: &ParamStore,
    config: &TransolverConfig,
    layer: usize,
) -> Result<Tensor> {
    if x.cols() != config.channels {
        return Err(Error::ShapeMismatch {
            op: "physics_attention",
            detail: format!("input {:?} vs channels {}", x.shape(), config.channels),
        });
    }
    let n = x.rows();
    let perm = canonical_perm(x);
    let mut canon = Tensor::zeros(&[n, x.cols()]);
    for (ci, &oi) in perm.iter().enumerate() {
        for c in 0..x.cols() {
            canon.set(ci, c, x.at(oi, c));
        }
    }
    let mut tape = Tape::new();
    let xid = tape.input(canon);
    let ones = tape.input(Tensor::filled(&[n, 1], 1.0));
    let (out, _) = build_attention(&mut tape, store, config, layer, xid, ones)?;
    let v = tape.value(out);
    let mut original = Tensor::zeros(v.shape());
    for (ci, &oi) in perm.iter().enumerate() {
        for c in 0..v.cols() {
            original.set(oi, c, v.at(ci, c));
        }
    }
    Ok(original)
}

/// Weighted-mean slice aggregation Z = (M^T U) / (M^T 1), computed directly.
pub fn slice_tokens(m: &Tensor, u: &Tensor) -> Result<Tensor> {
    if m.rows() != u.rows() {
        return Err(Error::ShapeMismatch {
            op: "slice_tokens",
            detail: format!("M {:?} vs U {:?}", m.shape(), u.shape()),
        });
    }
    let (n, s, c) = (m.rows(), m.cols(), u.cols());
    let mut z = Tensor::zeros(&[s, c]);
    let mut colsum = vec![0.0; s];
    for i in 0..n {
        for j in 0..s {
            let w = m.at(i, j);
            colsum[j] += w;
            for k in 0..c {
                z.data_mut()[j * c + k] += w * u.at(i, k);
            }
        }
    }
    for j in 0..s {
        for k in 0..c {
            z.data_mut()[j * c + k] /= colsum[j];
        }
    }
    Ok(z)
}
