//! Forward kernels and their vector-Jacobian products.

use super::tape::{Node, Var};
use super::{Result, Tensor, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(super) enum Unary {
    Tanh,
    Sigmoid,
    Relu,
    Exp,
    Log,
    Sin,
    Cos,
    Elu,
}

pub(super) enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Unary(usize, Unary),
    MatMul(usize, usize),
    Bmm { a: usize, b: usize, transpose_b: bool },
    Softmax(usize),
    LayerNorm { x: usize, inv_std: Vec<f64> },
    Concat { inputs: Vec<usize>, axis: usize },
    Slice { x: usize, axis: usize, start: usize },
    Permute { x: usize, axes: Vec<usize> },
    Reshape(usize),
    EmbeddingLookup { table: usize, ids: Vec<usize> },
    PickLast { x: usize, idx: Vec<usize> },
    ComplexMul(usize, usize),
    SumAll(usize),
    MeanAll(usize),
}

/// `c (+)= op(a) * op(b)` with `a` logically `[m, k]` and `b` logically `[k, n]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: slice lengths are checked above and the strides describe
    // row-major (or transposed row-major) layouts that stay inside them.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn is_suffix(full: &[usize], suffix: &[usize]) -> bool {
    suffix.len() <= full.len() && full[full.len() - suffix.len()..] == *suffix
}

/// Sums `g` (shaped like the broadcast output) down to `len` trailing values.
fn reduce_to_suffix(g: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for chunk in g.chunks(len) {
        for (o, v) in out.iter_mut().zip(chunk) {
            *o += v;
        }
    }
    out
}

fn outer_inner(shape: &[usize], axis: usize) -> (usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, inner)
}

fn last_dim(shape: &[usize]) -> usize {
    *shape.last().unwrap_or(&1)
}

fn unary_forward(kind: Unary, x: f64) -> f64 {
    match kind {
        Unary::Tanh => x.tanh(),
        Unary::Sigmoid => {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        }
        Unary::Relu => x.max(0.0),
        Unary::Exp => x.exp(),
        Unary::Log => x.ln(),
        Unary::Sin => x.sin(),
        Unary::Cos => x.cos(),
        Unary::Elu => {
            if x > 0.0 {
                x
            } else {
                x.exp_m1()
            }
        }
    }
}

fn unary_derivative(kind: Unary, x: f64, y: f64) -> f64 {
    match kind {
        Unary::Tanh => 1.0 - y * y,
        Unary::Sigmoid => y * (1.0 - y),
        Unary::Relu => {
            if x > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Unary::Exp => y,
        Unary::Log => 1.0 / x,
        Unary::Sin => x.cos(),
        Unary::Cos => -x.sin(),
        Unary::Elu => {
            if x > 0.0 {
                1.0
            } else {
                y + 1.0
            }
        }
    }
}

pub(crate) fn softmax_rows(x: &[f64], width: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (row, o) in x.chunks(width).zip(out.chunks_mut(width)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (oi, &xi) in o.iter_mut().zip(row) {
            *oi = (xi - max).exp();
            sum += *oi;
        }
        for oi in o.iter_mut() {
            *oi /= sum;
        }
    }
    out
}

pub(super) fn permute_data(data: &[f64], shape: &[usize], axes: &[usize]) -> (Vec<f64>, Vec<usize>) {
    let nd = shape.len();
    let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
    let mut in_strides = vec![1usize; nd];
    for i in (0..nd.saturating_sub(1)).rev() {
        in_strides[i] = in_strides[i + 1] * shape[i + 1];
    }
    let strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let mut out = Vec::with_capacity(data.len());
    let mut idx = vec![0usize; nd];
    let mut offset = 0usize;
    for _ in 0..data.len() {
        out.push(data[offset]);
        for d in (0..nd).rev() {
            idx[d] += 1;
            offset += strides[d];
            if idx[d] < out_shape[d] {
                break;
            }
            offset -= strides[d] * out_shape[d];
            idx[d] = 0;
        }
    }
    (out, out_shape)
}

impl<'t> Var<'t> {
    fn binary_shapes(&self, other: &Var<'t>, op: &'static str) -> Result<(Vec<usize>, Vec<usize>)> {
        let (a, b) = (self.shape(), other.shape());
        if !is_suffix(&a, &b) {
            return Err(TensorError::ShapeMismatch { op, lhs: a, rhs: b });
        }
        Ok((a, b))
    }

    fn requires(&self, others: &[&Var<'t>]) -> bool {
        let nodes = self.tape.nodes();
        nodes[self.id].requires_grad || others.iter().any(|o| nodes[o.id].requires_grad)
    }

    fn elementwise(&self, other: Var<'t>, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<(Tensor, bool)> {
        let (shape, bshape) = self.binary_shapes(&other, op)?;
        let rg = self.requires(&[&other]);
        let nodes = self.tape.nodes();
        let a = nodes[self.id].value.data();
        let b = nodes[other.id].value.data();
        let blen = bshape.iter().product::<usize>().max(1);
        let mut out = Vec::with_capacity(a.len());
        for chunk in a.chunks(blen) {
            out.extend(chunk.iter().zip(b).map(|(&x, &y)| f(x, y)));
        }
        Ok((Tensor { shape, data: out }, rg))
    }

    /// Elementwise sum; `other`'s shape must be a suffix of `self`'s.
    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        let (t, rg) = self.elementwise(other, "add", |x, y| x + y)?;
        Ok(self.tape.push(t, Op::Add(self.id, other.id), rg))
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        let (t, rg) = self.elementwise(other, "sub", |x, y| x - y)?;
        Ok(self.tape.push(t, Op::Sub(self.id, other.id), rg))
    }

    /// Hadamard product with suffix broadcasting.
    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        let (t, rg) = self.elementwise(other, "mul", |x, y| x * y)?;
        Ok(self.tape.push(t, Op::Mul(self.id, other.id), rg))
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        let t = self.value().map(|x| x * c);
        let rg = self.requires(&[]);
        self.tape.push(t, Op::Scale(self.id, c), rg)
    }

    pub fn add_scalar(self, c: f64) -> Var<'t> {
        let t = self.value().map(|x| x + c);
        let rg = self.requires(&[]);
        self.tape.push(t, Op::AddScalar(self.id), rg)
    }

    pub fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }

    fn unary(self, kind: Unary) -> Var<'t> {
        let t = self.value().map(|x| unary_forward(kind, x));
        let rg = self.requires(&[]);
        self.tape.push(t, Op::Unary(self.id, kind), rg)
    }

    pub fn tanh(self) -> Var<'t> {
        self.unary(Unary::Tanh)
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.unary(Unary::Sigmoid)
    }

    pub fn relu(self) -> Var<'t> {
        self.unary(Unary::Relu)
    }

    pub fn exp(self) -> Var<'t> {
        self.unary(Unary::Exp)
    }

    pub fn log(self) -> Var<'t> {
        self.unary(Unary::Log)
    }

    pub fn sin(self) -> Var<'t> {
        self.unary(Unary::Sin)
    }

    pub fn cos(self) -> Var<'t> {
        self.unary(Unary::Cos)
    }

    pub fn elu(self) -> Var<'t> {
        self.unary(Unary::Elu)
    }

    /// `[m, k] x [k, n] -> [m, n]`. A left operand with more than two
    /// dimensions is treated as `[prod(leading), k]`.
    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        let (ash, bsh) = (self.shape(), other.shape());
        if ash.is_empty() || bsh.len() != 2 || last_dim(&ash) != bsh[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: ash,
                rhs: bsh,
            });
        }
        let k = bsh[0];
        let n = bsh[1];
        let m = ash.iter().product::<usize>() / k.max(1);
        let rg = self.requires(&[&other]);
        let mut out = vec![0.0; m * n];
        {
            let nodes = self.tape.nodes();
            gemm(
                m,
                k,
                n,
                nodes[self.id].value.data(),
                false,
                nodes[other.id].value.data(),
                false,
                &mut out,
                false,
            );
        }
        let mut shape = ash;
        *shape.last_mut().unwrap() = n;
        Ok(self.tape.push(Tensor { shape, data: out }, Op::MatMul(self.id, other.id), rg))
    }

    /// Batched matmul `[b, m, k] x [b, k, n]`, or `[b, m, k] x [b, n, k]^T`
    /// when `transpose_b` is set.
    pub fn bmm(self, other: Var<'t>, transpose_b: bool) -> Result<Var<'t>> {
        let (ash, bsh) = (self.shape(), other.shape());
        let bad = || TensorError::ShapeMismatch {
            op: "bmm",
            lhs: ash.clone(),
            rhs: bsh.clone(),
        };
        if ash.len() != 3 || bsh.len() != 3 || ash[0] != bsh[0] {
            return Err(bad());
        }
        let (batch, m, k) = (ash[0], ash[1], ash[2]);
        let (kb, n) = if transpose_b { (bsh[2], bsh[1]) } else { (bsh[1], bsh[2]) };
        if kb != k {
            return Err(bad());
        }
        let rg = self.requires(&[&other]);
        let mut out = vec![0.0; batch * m * n];
        {
            let nodes = self.tape.nodes();
            let a = nodes[self.id].value.data();
            let b = nodes[other.id].value.data();
            for i in 0..batch {
                gemm(
                    m,
                    k,
                    n,
                    &a[i * m * k..(i + 1) * m * k],
                    false,
                    &b[i * k * n..(i + 1) * k * n],
                    transpose_b,
                    &mut out[i * m * n..(i + 1) * m * n],
                    false,
                );
            }
        }
        Ok(self.tape.push(
            Tensor {
                shape: vec![batch, m, n],
                data: out,
            },
            Op::Bmm {
                a: self.id,
                b: other.id,
                transpose_b,
            },
            rg,
        ))
    }

    /// Softmax over the last axis.
    pub fn softmax(self) -> Var<'t> {
        let (data, shape) = {
            let v = self.value();
            (softmax_rows(v.data(), last_dim(v.shape())), v.shape().to_vec())
        };
        let rg = self.requires(&[]);
        self.tape.push(Tensor { shape, data }, Op::Softmax(self.id), rg)
    }

    /// Normalizes each row over the last axis to zero mean and unit variance.
    pub fn layer_norm(self, eps: f64) -> Var<'t> {
        let (data, shape, inv_std) = {
            let v = self.value();
            let w = last_dim(v.shape());
            let mut out = vec![0.0; v.len()];
            let mut inv = Vec::with_capacity(v.len() / w.max(1));
            for (row, o) in v.data().chunks(w).zip(out.chunks_mut(w)) {
                let mean = row.iter().sum::<f64>() / w as f64;
                let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / w as f64;
                let is = 1.0 / (var + eps).sqrt();
                for (oi, xi) in o.iter_mut().zip(row) {
                    *oi = (xi - mean) * is;
                }
                inv.push(is);
            }
            (out, v.shape().to_vec(), inv)
        };
        let rg = self.requires(&[]);
        self.tape.push(
            Tensor { shape, data },
            Op::LayerNorm { x: self.id, inv_std },
            rg,
        )
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(parts: &[Var<'t>], axis: usize) -> Result<Var<'t>> {
        let first = parts.first().ok_or(TensorError::Invalid {
            op: "concat",
            msg: "no inputs".into(),
        })?;
        let tape = first.tape;
        let base = first.shape();
        if axis >= base.len() {
            return Err(TensorError::Invalid {
                op: "concat",
                msg: format!("axis {} out of range for {:?}", axis, base),
            });
        }
        let mut total = 0;
        for p in parts {
            let s = p.shape();
            let ok = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (x, y))| d == axis || x == y);
            if !ok {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: base,
                    rhs: s,
                });
            }
            total += s[axis];
        }
        let (outer, inner) = outer_inner(&base, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        let rg;
        {
            let nodes = tape.nodes();
            rg = parts.iter().any(|p| nodes[p.id].requires_grad);
            for o in 0..outer {
                for p in parts {
                    let v = &nodes[p.id].value;
                    let span = v.shape()[axis] * inner;
                    out.extend_from_slice(&v.data()[o * span..(o + 1) * span]);
                }
            }
        }
        let mut shape = base;
        shape[axis] = total;
        Ok(tape.push(
            Tensor { shape, data: out },
            Op::Concat {
                inputs: parts.iter().map(|p| p.id).collect(),
                axis,
            },
            rg,
        ))
    }

    /// Elements `start..end` along `axis`.
    pub fn slice(self, axis: usize, start: usize, end: usize) -> Result<Var<'t>> {
        let shape = self.shape();
        if axis >= shape.len() || start > end || end > shape[axis] {
            return Err(TensorError::Invalid {
                op: "slice",
                msg: format!("range {}..{} on axis {} of {:?}", start, end, axis, shape),
            });
        }
        let (outer, inner) = outer_inner(&shape, axis);
        let span = shape[axis] * inner;
        let mut out = Vec::with_capacity(outer * (end - start) * inner);
        {
            let v = self.value();
            for o in 0..outer {
                out.extend_from_slice(&v.data()[o * span + start * inner..o * span + end * inner]);
            }
        }
        let mut new_shape = shape;
        new_shape[axis] = end - start;
        let rg = self.requires(&[]);
        Ok(self.tape.push(
            Tensor {
                shape: new_shape,
                data: out,
            },
            Op::Slice {
                x: self.id,
                axis,
                start,
            },
            rg,
        ))
    }

    pub fn permute(self, axes: &[usize]) -> Result<Var<'t>> {
        let shape = self.shape();
        let mut seen = vec![false; shape.len()];
        let valid = axes.len() == shape.len()
            && axes.iter().all(|&a| a < shape.len() && !std::mem::replace(&mut seen[a], true));
        if !valid {
            return Err(TensorError::Invalid {
                op: "permute",
                msg: format!("axes {:?} for shape {:?}", axes, shape),
            });
        }
        let (data, out_shape) = permute_data(self.value().data(), &shape, axes);
        let rg = self.requires(&[]);
        Ok(self.tape.push(
            Tensor {
                shape: out_shape,
                data,
            },
            Op::Permute {
                x: self.id,
                axes: axes.to_vec(),
            },
            rg,
        ))
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>> {
        let t = self.value().clone().reshape(shape)?;
        let rg = self.requires(&[]);
        Ok(self.tape.push(t, Op::Reshape(self.id), rg))
    }

    /// Rows of a `[vocab, d]` table selected by `ids`, giving `[ids.len(), d]`.
    pub fn embedding_lookup(self, ids: &[usize]) -> Result<Var<'t>> {
        let shape = self.shape();
        if shape.len() != 2 {
            return Err(TensorError::Invalid {
                op: "embedding_lookup",
                msg: format!("table must be 2-D, got {:?}", shape),
            });
        }
        let (vocab, d) = (shape[0], shape[1]);
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
            return Err(TensorError::Invalid {
                op: "embedding_lookup",
                msg: format!("id {} out of range for vocabulary {}", bad, vocab),
            });
        }
        let mut out = Vec::with_capacity(ids.len() * d);
        {
            let v = self.value();
            for &i in ids {
                out.extend_from_slice(&v.data()[i * d..(i + 1) * d]);
            }
        }
        let rg = self.requires(&[]);
        Ok(self.tape.push(
            Tensor {
                shape: vec![ids.len(), d],
                data: out,
            },
            Op::EmbeddingLookup {
                table: self.id,
                ids: ids.to_vec(),
            },
            rg,
        ))
    }

    /// For `[m, n]` input, picks column `idx[r]` of each row `r`, giving `[m]`.
    pub fn pick_last(self, idx: &[usize]) -> Result<Var<'t>> {
        let shape = self.shape();
        if shape.len() != 2 || shape[0] != idx.len() || idx.iter().any(|&i| i >= shape[1]) {
            return Err(TensorError::Invalid {
                op: "pick_last",
                msg: format!("{} indices into {:?}", idx.len(), shape),
            });
        }
        let out: Vec<f64> = {
            let v = self.value();
            idx.iter().enumerate().map(|(r, &c)| v.data()[r * shape[1] + c]).collect()
        };
        let rg = self.requires(&[]);
        Ok(self.tape.push(
            Tensor::from_vec(out),
            Op::PickLast {
                x: self.id,
                idx: idx.to_vec(),
            },
            rg,
        ))
    }

    /// Elementwise complex product over interleaved `(re, im)` pairs in the
    /// last axis, with suffix broadcasting of `other`.
    pub fn complex_pair_mul(self, other: Var<'t>) -> Result<Var<'t>> {
        let (shape, bshape) = self.binary_shapes(&other, "complex_pair_mul")?;
        if last_dim(&shape) % 2 != 0 || bshape.is_empty() {
            return Err(TensorError::Invalid {
                op: "complex_pair_mul",
                msg: format!("last axis must hold (re, im) pairs, got {:?}", shape),
            });
        }
        let rg = self.requires(&[&other]);
        let out = {
            let nodes = self.tape.nodes();
            let a = nodes[self.id].value.data();
            let b = nodes[other.id].value.data();
            let mut out = vec![0.0; a.len()];
            for (ac, oc) in a.chunks(b.len()).zip(out.chunks_mut(b.len())) {
                for ((ap, bp), op) in ac.chunks(2).zip(b.chunks(2)).zip(oc.chunks_mut(2)) {
                    op[0] = ap[0] * bp[0] - ap[1] * bp[1];
                    op[1] = ap[0] * bp[1] + ap[1] * bp[0];
                }
            }
            out
        };
        Ok(self.tape.push(
            Tensor { shape, data: out },
            Op::ComplexMul(self.id, other.id),
            rg,
        ))
    }

    pub fn sum(self) -> Var<'t> {
        let s = self.value().data().iter().sum();
        let rg = self.requires(&[]);
        self.tape.push(Tensor::scalar(s), Op::SumAll(self.id), rg)
    }

    pub fn mean(self) -> Var<'t> {
        let v = self.value();
        let s = v.data().iter().sum::<f64>() / v.len().max(1) as f64;
        drop(v);
        let rg = self.requires(&[]);
        self.tape.push(Tensor::scalar(s), Op::MeanAll(self.id), rg)
    }
}

fn val(nodes: &[Node], id: usize) -> &Tensor {
    &nodes[id].value
}

fn scaled(g: &Tensor, f: impl Fn(usize, f64) -> f64) -> Tensor {
    Tensor {
        shape: g.shape().to_vec(),
        data: g.data().iter().enumerate().map(|(i, &x)| f(i, x)).collect(),
    }
}

fn suffix_grad(g: &Tensor, target: &Tensor, per: impl Fn(usize, f64) -> f64) -> Tensor {
    let raw: Vec<f64> = g.data().iter().enumerate().map(|(i, &x)| per(i, x)).collect();
    let data = if target.len() == raw.len() {
        raw
    } else {
        reduce_to_suffix(&raw, target.len())
    };
    Tensor {
        shape: target.shape().to_vec(),
        data,
    }
}

pub(super) fn backward_op(
    op: &Op,
    out: &Tensor,
    g: &Tensor,
    nodes: &[Node],
    acc: &mut dyn FnMut(usize, Tensor),
) {
    match *op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            acc(a, g.clone());
            acc(b, suffix_grad(g, val(nodes, b), |_, x| x));
        }
        Op::Sub(a, b) => {
            acc(a, g.clone());
            acc(b, suffix_grad(g, val(nodes, b), |_, x| -x));
        }
        Op::Mul(a, b) => {
            let (av, bv) = (val(nodes, a), val(nodes, b));
            let bl = bv.len().max(1);
            acc(a, scaled(g, |i, x| x * bv.data()[i % bl]));
            acc(b, suffix_grad(g, bv, |i, x| x * av.data()[i]));
        }
        Op::Scale(a, c) => acc(a, scaled(g, |_, x| x * c)),
        Op::AddScalar(a) => acc(a, g.clone()),
        Op::Unary(a, kind) => {
            let xv = val(nodes, a);
            acc(
                a,
                scaled(g, |i, x| x * unary_derivative(kind, xv.data()[i], out.data()[i])),
            );
        }
        Op::MatMul(a, b) => {
            let (av, bv) = (val(nodes, a), val(nodes, b));
            let (k, n) = (bv.shape()[0], bv.shape()[1]);
            let m = av.len() / k.max(1);
            let mut ga = vec![0.0; av.len()];
            gemm(m, n, k, g.data(), false, bv.data(), true, &mut ga, false);
            let mut gb = vec![0.0; bv.len()];
            gemm(k, m, n, av.data(), true, g.data(), false, &mut gb, false);
            acc(a, Tensor { shape: av.shape().to_vec(), data: ga });
            acc(b, Tensor { shape: bv.shape().to_vec(), data: gb });
        }
        Op::Bmm { a, b, transpose_b } => {
            let (av, bv) = (val(nodes, a), val(nodes, b));
            let (batch, m, k) = (av.shape()[0], av.shape()[1], av.shape()[2]);
            let n = out.shape()[2];
            let mut ga = vec![0.0; av.len()];
            let mut gb = vec![0.0; bv.len()];
            for i in 0..batch {
                let gi = &g.data()[i * m * n..(i + 1) * m * n];
                let ai = &av.data()[i * m * k..(i + 1) * m * k];
                let bi = &bv.data()[i * k * n..(i + 1) * k * n];
                // dA = G B^T (B stored [k,n]) or G B (B stored [n,k])
                gemm(m, n, k, gi, false, bi, !transpose_b, &mut ga[i * m * k..(i + 1) * m * k], false);
                if transpose_b {
                    // B stored [n, k]: dB = G^T A
                    gemm(n, m, k, gi, true, ai, false, &mut gb[i * k * n..(i + 1) * k * n], false);
                } else {
                    gemm(k, m, n, ai, true, gi, false, &mut gb[i * k * n..(i + 1) * k * n], false);
                }
            }
            acc(a, Tensor { shape: av.shape().to_vec(), data: ga });
            acc(b, Tensor { shape: bv.shape().to_vec(), data: gb });
        }
        Op::Softmax(a) => {
            let w = last_dim(out.shape());
            let mut gx = vec![0.0; out.len()];
            for ((y, dy), dx) in out.data().chunks(w).zip(g.data().chunks(w)).zip(gx.chunks_mut(w)) {
                let dot: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
                for ((d, yi), dyi) in dx.iter_mut().zip(y).zip(dy) {
                    *d = yi * (dyi - dot);
                }
            }
            acc(a, Tensor { shape: out.shape().to_vec(), data: gx });
        }
        Op::LayerNorm { x, ref inv_std } => {
            let w = last_dim(out.shape());
            let mut gx = vec![0.0; out.len()];
            for (r, ((y, dy), dx)) in out
                .data()
                .chunks(w)
                .zip(g.data().chunks(w))
                .zip(gx.chunks_mut(w))
                .enumerate()
            {
                let mean_dy = dy.iter().sum::<f64>() / w as f64;
                let mean_dyy = dy.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / w as f64;
                for ((d, yi), dyi) in dx.iter_mut().zip(y).zip(dy) {
                    *d = inv_std[r] * (dyi - mean_dy - yi * mean_dyy);
                }
            }
            acc(x, Tensor { shape: out.shape().to_vec(), data: gx });
        }
        Op::Concat { ref inputs, axis } => {
            let (outer, inner) = outer_inner(out.shape(), axis);
            let total = out.shape()[axis];
            let mut offset = 0;
            for &id in inputs {
                let v = val(nodes, id);
                let width = v.shape()[axis];
                let mut gi = Vec::with_capacity(v.len());
                for o in 0..outer {
                    let base = o * total * inner + offset * inner;
                    gi.extend_from_slice(&g.data()[base..base + width * inner]);
                }
                offset += width;
                acc(id, Tensor { shape: v.shape().to_vec(), data: gi });
            }
        }
        Op::Slice { x, axis, start } => {
            let xv = val(nodes, x);
            let (outer, inner) = outer_inner(xv.shape(), axis);
            let span = xv.shape()[axis] * inner;
            let width = out.shape()[axis] * inner;
            let mut gx = vec![0.0; xv.len()];
            for o in 0..outer {
                gx[o * span + start * inner..o * span + start * inner + width]
                    .copy_from_slice(&g.data()[o * width..(o + 1) * width]);
            }
            acc(x, Tensor { shape: xv.shape().to_vec(), data: gx });
        }
        Op::Permute { x, ref axes } => {
            let mut inverse = vec![0; axes.len()];
            for (i, &a) in axes.iter().enumerate() {
                inverse[a] = i;
            }
            let (data, shape) = permute_data(g.data(), g.shape(), &inverse);
            acc(x, Tensor { shape, data });
        }
        Op::Reshape(x) => {
            let xv = val(nodes, x);
            acc(x, Tensor { shape: xv.shape().to_vec(), data: g.data().to_vec() });
        }
        Op::EmbeddingLookup { table, ref ids } => {
            let tv = val(nodes, table);
            let d = tv.shape()[1];
            let mut gt = vec![0.0; tv.len()];
            for (r, &i) in ids.iter().enumerate() {
                for (t, v) in gt[i * d..(i + 1) * d].iter_mut().zip(&g.data()[r * d..(r + 1) * d]) {
                    *t += v;
                }
            }
            acc(table, Tensor { shape: tv.shape().to_vec(), data: gt });
        }
        Op::PickLast { x, ref idx } => {
            let xv = val(nodes, x);
            let n = xv.shape()[1];
            let mut gx = vec![0.0; xv.len()];
            for (r, &c) in idx.iter().enumerate() {
                gx[r * n + c] = g.data()[r];
            }
            acc(x, Tensor { shape: xv.shape().to_vec(), data: gx });
        }
        Op::ComplexMul(a, b) => {
            let (av, bv) = (val(nodes, a), val(nodes, b));
            let bl = bv.len();
            let mut ga = vec![0.0; av.len()];
            let mut gb = vec![0.0; bl];
            // d/da = g * conj(b), d/db = g * conj(a)
            for p in 0..av.len() / 2 {
                let (i, j) = (2 * p, (2 * p) % bl);
                let (gr, gi) = (g.data()[i], g.data()[i + 1]);
                let (ar, ai) = (av.data()[i], av.data()[i + 1]);
                let (br, bi) = (bv.data()[j], bv.data()[j + 1]);
                ga[i] = gr * br + gi * bi;
                ga[i + 1] = -gr * bi + gi * br;
                gb[j] += gr * ar + gi * ai;
                gb[j + 1] += -gr * ai + gi * ar;
            }
            acc(a, Tensor { shape: av.shape().to_vec(), data: ga });
            acc(b, Tensor { shape: bv.shape().to_vec(), data: gb });
        }
        Op::SumAll(a) => {
            let v = val(nodes, a);
            acc(a, Tensor::full(v.shape(), g.item()));
        }
        Op::MeanAll(a) => {
            let v = val(nodes, a);
            acc(a, Tensor::full(v.shape(), g.item() / v.len().max(1) as f64));
        }
    }
}
