//! Reverse-mode differentiation over a linear tape.
//!
//! Nodes are appended in evaluation order, so the tape is acyclic by
//! construction and a single reverse sweep is a valid topological order.

use super::kernels::{gelu, gelu_grad, gemm, softmax_rows_in_place};
use super::tensor::Tensor;
use crate::error::{GilError, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A contiguous run of rows that attend only to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    Gelu(Var),
    LayerNorm { x: Var, gain: Var, bias: Var, rstd: Vec<f64> },
    SoftmaxRows(Var),
    GatherRows { table: Var, indices: Vec<usize> },
    SegmentAttention { q: Var, k: Var, v: Var, segments: Vec<Segment>, n_heads: usize },
    WeightedSqError { pred: Var, target: Vec<f64>, weights: Vec<f64> },
    CrossEntropy { logits: Var, labels: Vec<usize> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by leaf.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `var`; zeros when the loss does not reach it.
    pub fn get(&self, var: Var) -> Tensor {
        let shape = self.shapes[var.0].clone();
        match &self.grads[var.0] {
            Some(g) => Tensor::from_parts(shape, g.clone()),
            None => Tensor::zeros(shape),
        }
    }

    /// Moves the gradient out, leaving zeros behind.
    pub fn take(&mut self, var: Var) -> Tensor {
        let shape = self.shapes[var.0].clone();
        match self.grads[var.0].take() {
            Some(g) => Tensor::from_parts(shape, g),
            None => Tensor::zeros(shape),
        }
    }
}

fn shape_err(op: &str, detail: String) -> GilError {
    GilError::Shape(format!("{op}: {detail}"))
}

fn accumulate(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(GilError::NonFinite(name));
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    fn matrix_dims(&self, var: Var, op: &str) -> Result<(usize, usize)> {
        let shape = self.nodes[var.0].value.shape();
        if shape.len() != 2 {
            return Err(shape_err(op, format!("expected a matrix, got shape {shape:?}")));
        }
        Ok((shape[0], shape[1]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.matrix_dims(a, "matmul")?;
        let (k2, n) = self.matrix_dims(b, "matmul")?;
        if k != k2 {
            return Err(shape_err("matmul", format!("inner dimensions {k} and {k2} differ")));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, 1.0, self.nodes[a.0].value.data(), k, 1, self.nodes[b.0].value.data(), n, 1, 0.0, &mut out, n, 1);
        self.push("matmul", Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.shape() != vb.shape() {
            return Err(shape_err("add", format!("{:?} vs {:?}", va.shape(), vb.shape())));
        }
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect();
        let shape = va.shape().to_vec();
        self.push("add", Tensor::from_parts(shape, data), Op::Add(a, b), &[a, b])
    }

    /// Adds a length-`n` bias to every row of an `m×n` matrix.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (_, n) = self.matrix_dims(a, "add_bias")?;
        let vb = &self.nodes[bias.0].value;
        if vb.len() != n {
            return Err(shape_err("add_bias", format!("bias of {} for {n} columns", vb.len())));
        }
        let mut data = self.nodes[a.0].value.data().to_vec();
        for row in data.chunks_mut(n) {
            accumulate(row, vb.data());
        }
        let shape = self.nodes[a.0].value.shape().to_vec();
        self.push("add_bias", Tensor::from_parts(shape, data), Op::AddBias(a, bias), &[a, bias])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.shape() != vb.shape() {
            return Err(shape_err("mul", format!("{:?} vs {:?}", va.shape(), vb.shape())));
        }
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
        let shape = va.shape().to_vec();
        self.push("mul", Tensor::from_parts(shape, data), Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let va = &self.nodes[a.0].value;
        let data = va.data().iter().map(|x| x * c).collect();
        let shape = va.shape().to_vec();
        self.push("scale", Tensor::from_parts(shape, data), Op::Scale(a, c), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.nodes[a.0].value.data().iter().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        let va = &self.nodes[a.0].value;
        let data = va.data().iter().map(|&x| gelu(x)).collect();
        let shape = va.shape().to_vec();
        self.push("gelu", Tensor::from_parts(shape, data), Op::Gelu(a), &[a])
    }

    /// Per-row normalisation to zero mean / unit variance, then `gain ⊙ x̂ + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (m, d) = self.matrix_dims(x, "layer_norm")?;
        if d == 0 {
            return Err(shape_err("layer_norm", "zero-width rows".into()));
        }
        let (g, b) = (&self.nodes[gain.0].value, &self.nodes[bias.0].value);
        if g.len() != d || b.len() != d {
            return Err(shape_err("layer_norm", format!("gain/bias must have {d} entries")));
        }
        let xv = self.nodes[x.0].value.data();
        let mut out = vec![0.0; m * d];
        let mut rstd = Vec::with_capacity(m);
        for (row, orow) in xv.chunks(d).zip(out.chunks_mut(d)) {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let r = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for j in 0..d {
                orow[j] = (row[j] - mean) * r * g.data()[j] + b.data()[j];
            }
            rstd.push(r);
        }
        self.push(
            "layer_norm",
            Tensor::from_parts(vec![m, d], out),
            Op::LayerNorm { x, gain, bias, rstd },
            &[x, gain, bias],
        )
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let (m, n) = self.matrix_dims(x, "softmax_rows")?;
        let mut data = self.nodes[x.0].value.data().to_vec();
        softmax_rows_in_place(&mut data, n, 1.0);
        self.push("softmax_rows", Tensor::from_parts(vec![m, n], data), Op::SoftmaxRows(x), &[x])
    }

    pub fn gather_rows(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let (vocab, d) = self.matrix_dims(table, "gather_rows")?;
        let tv = self.nodes[table.0].value.data();
        let mut out = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            if i >= vocab {
                return Err(GilError::Vocabulary { index: i, size: vocab });
            }
            out.extend_from_slice(&tv[i * d..(i + 1) * d]);
        }
        self.push(
            "gather_rows",
            Tensor::from_parts(vec![indices.len(), d], out),
            Op::GatherRows { table, indices: indices.to_vec() },
            &[table],
        )
    }

    /// Multi-head scaled dot-product attention restricted to segments.
    ///
    /// `q`, `k`, `v` are `T×d`; rows only attend within their own segment and
    /// rows outside every segment produce zeros.
    pub fn segment_attention(&mut self, q: Var, k: Var, v: Var, segments: &[Segment], n_heads: usize) -> Result<Var> {
        let (t, d) = self.matrix_dims(q, "segment_attention")?;
        for other in [k, v] {
            if self.matrix_dims(other, "segment_attention")? != (t, d) {
                return Err(shape_err("segment_attention", "q/k/v shapes differ".into()));
            }
        }
        if n_heads == 0 || d % n_heads != 0 {
            return Err(shape_err("segment_attention", format!("{d} not divisible by {n_heads} heads")));
        }
        for s in segments {
            if s.start + s.len > t {
                return Err(shape_err("segment_attention", format!("segment {s:?} exceeds {t} rows")));
            }
        }
        let dh = d / n_heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let (qv, kv, vv) = (self.nodes[q.0].value.data(), self.nodes[k.0].value.data(), self.nodes[v.0].value.data());
        let mut out = vec![0.0; t * d];
        let mut scores = Vec::new();
        for s in segments {
            let len = s.len;
            if len == 0 {
                continue;
            }
            scores.resize(len * len, 0.0);
            for h in 0..n_heads {
                let off = s.start * d + h * dh;
                gemm(len, dh, len, 1.0, &qv[off..], d, 1, &kv[off..], 1, d, 0.0, &mut scores, len, 1);
                softmax_rows_in_place(&mut scores, len, scale);
                gemm(len, len, dh, 1.0, &scores, len, 1, &vv[off..], d, 1, 0.0, &mut out[off..], d, 1);
            }
        }
        self.push(
            "segment_attention",
            Tensor::from_parts(vec![t, d], out),
            Op::SegmentAttention { q, k, v, segments: segments.to_vec(), n_heads },
            &[q, k, v],
        )
    }

    /// `Σ weights_i · (pred_i − target_i)²` as a scalar.
    pub fn weighted_sq_error(&mut self, pred: Var, target: &[f64], weights: &[f64]) -> Result<Var> {
        let p = self.nodes[pred.0].value.data();
        if p.len() != target.len() || p.len() != weights.len() {
            return Err(shape_err(
                "weighted_sq_error",
                format!("{} predictions, {} targets, {} weights", p.len(), target.len(), weights.len()),
            ));
        }
        let s = p.iter().zip(target).zip(weights).map(|((p, t), w)| w * (p - t) * (p - t)).sum();
        self.push(
            "weighted_sq_error",
            Tensor::scalar(s),
            Op::WeightedSqError { pred, target: target.to_vec(), weights: weights.to_vec() },
            &[pred],
        )
    }

    /// Mean softmax cross-entropy of `m×C` logits against integer labels.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (m, c) = self.matrix_dims(logits, "cross_entropy")?;
        if labels.len() != m || m == 0 {
            return Err(shape_err("cross_entropy", format!("{} labels for {m} rows", labels.len())));
        }
        let lv = self.nodes[logits.0].value.data();
        let mut total = 0.0;
        for (row, &y) in lv.chunks(c).zip(labels) {
            if y >= c {
                return Err(shape_err("cross_entropy", format!("label {y} with {c} classes")));
            }
            let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[y];
        }
        self.push(
            "cross_entropy",
            Tensor::scalar(total / m as f64),
            Op::CrossEntropy { logits, labels: labels.to_vec() },
            &[logits],
        )
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let n_nodes = loss.0 + 1;
        if self.nodes[loss.0].value.len() != 1 {
            return Err(GilError::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n_nodes];
        grads[loss.0] = Some(vec![1.0]);
        let nodes = &self.nodes;

        // Returns the gradient buffer of `var`, or None when it needs no gradient.
        fn slot<'g>(grads: &'g mut [Option<Vec<f64>>], nodes: &[Node], var: Var) -> Option<&'g mut Vec<f64>> {
            let node = &nodes[var.0];
            if !node.requires_grad {
                return None;
            }
            Some(grads[var.0].get_or_insert_with(|| vec![0.0; node.value.len()]))
        }

        for i in (0..n_nodes).rev() {
            if !nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            match &nodes[i].op {
                Op::Leaf => {
                    grads[i] = Some(g);
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
                    let (m, k, n) = (va.shape()[0], va.shape()[1], vb.shape()[1]);
                    if let Some(ga) = slot(&mut grads, nodes, *a) {
                        // dA += G · Bᵀ
                        gemm(m, n, k, 1.0, &g, n, 1, vb.data(), 1, n, 1.0, ga, k, 1);
                    }
                    if let Some(gb) = slot(&mut grads, nodes, *b) {
                        // dB += Aᵀ · G
                        gemm(k, m, n, 1.0, va.data(), 1, k, &g, n, 1, 1.0, gb, n, 1);
                    }
                }
                Op::Add(a, b) => {
                    if let Some(ga) = slot(&mut grads, nodes, *a) {
                        accumulate(ga, &g);
                    }
                    if let Some(gb) = slot(&mut grads, nodes, *b) {
                        accumulate(gb, &g);
                    }
                }
                Op::AddBias(a, bias) => {
                    if let Some(ga) = slot(&mut grads, nodes, *a) {
                        accumulate(ga, &g);
                    }
                    let n = nodes[bias.0].value.len();
                    if let Some(gb) = slot(&mut grads, nodes, *bias) {
                        for row in g.chunks(n) {
                            accumulate(gb, row);
                        }
                    }
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                    if let Some(ga) = slot(&mut grads, nodes, *a) {
                        for ((d, gi), bi) in ga.iter_mut().zip(&g).zip(vb) {
                            *d += gi * bi;
                        }
                    }
                    if let Some(gb) = slot(&mut grads, nodes, *b) {
                        for ((d, gi), ai) in gb.iter_mut().zip(&g).zip(va) {
                            *d += gi * ai;
                        }
                    }
                }
                Op::Scale(a, c) => {
                    if let Some(ga) = slot(&mut grads, nodes, *a) {
                        for (d, gi) in ga.iter_mut().zip(&g) {
                            *d += gi * c;
                        }
                    }
                }
                Op::Sum(a) => {
                    if let Some(ga) = slot(&mut grads, nodes, *a) {
                        for d in ga.iter_mut() {
                            *d += g[0];
                        }
                    }
                }
                Op::Gelu(a) => {
                    let va = nodes[a.0].value.data();
                    if let Some(ga) = slot(&mut grads, nodes, *a) {
                        for ((d, gi), x) in ga.iter_mut().zip(&g).zip(va) {
                            *d += gi * gelu_grad(*x);
                        }
                    }
                }
                Op::LayerNorm { x, gain, bias, rstd } => {
                    let xv = nodes[x.0].value.data();
                    let gv = nodes[gain.0].value.data();
                    let d = gv.len();
                    let mut xhat = vec![0.0; xv.len()];
                    for ((row, hrow), r) in xv.chunks(d).zip(xhat.chunks_mut(d)).zip(rstd) {
                        let mean = row.iter().sum::<f64>() / d as f64;
                        for j in 0..d {
                            hrow[j] = (row[j] - mean) * r;
                        }
                    }
                    if let Some(gx) = slot(&mut grads, nodes, *x) {
                        let mut dxhat = vec![0.0; d];
                        for (((grow, hrow), r), dxrow) in
                            g.chunks(d).zip(xhat.chunks(d)).zip(rstd).zip(gx.chunks_mut(d))
                        {
                            let mut mean_dxhat = 0.0;
                            let mut mean_dxhat_xhat = 0.0;
                            for j in 0..d {
                                dxhat[j] = grow[j] * gv[j];
                                mean_dxhat += dxhat[j];
                                mean_dxhat_xhat += dxhat[j] * hrow[j];
                            }
                            mean_dxhat /= d as f64;
                            mean_dxhat_xhat /= d as f64;
                            for j in 0..d {
                                dxrow[j] += r * (dxhat[j] - mean_dxhat - hrow[j] * mean_dxhat_xhat);
                            }
                        }
                    }
                    if let Some(gg) = slot(&mut grads, nodes, *gain) {
                        for (grow, hrow) in g.chunks(d).zip(xhat.chunks(d)) {
                            for j in 0..d {
                                gg[j] += grow[j] * hrow[j];
                            }
                        }
                    }
                    if let Some(gb) = slot(&mut grads, nodes, *bias) {
                        for grow in g.chunks(d) {
                            accumulate(gb, grow);
                        }
                    }
                }
                Op::SoftmaxRows(x) => {
                    let y = nodes[i].value.data();
                    let n = nodes[i].value.cols();
                    if let Some(gx) = slot(&mut grads, nodes, *x) {
                        for ((yrow, grow), dx) in y.chunks(n).zip(g.chunks(n)).zip(gx.chunks_mut(n)) {
                            let dot: f64 = yrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                            for j in 0..n {
                                dx[j] += yrow[j] * (grow[j] - dot);
                            }
                        }
                    }
                }
                Op::GatherRows { table, indices } => {
                    let d = nodes[table.0].value.cols();
                    if let Some(gt) = slot(&mut grads, nodes, *table) {
                        for (r, &idx) in indices.iter().enumerate() {
                            accumulate(&mut gt[idx * d..(idx + 1) * d], &g[r * d..(r + 1) * d]);
                        }
                    }
                }
                Op::SegmentAttention { q, k, v, segments, n_heads } => {
                    let (dq, dk, dv) = attention_backward(
                        &g,
                        nodes[q.0].value.data(),
                        nodes[k.0].value.data(),
                        nodes[v.0].value.data(),
                        nodes[q.0].value.cols(),
                        segments,
                        *n_heads,
                    );
                    for (var, grad) in [(*q, dq), (*k, dk), (*v, dv)] {
                        if let Some(buf) = slot(&mut grads, nodes, var) {
                            accumulate(buf, &grad);
                        }
                    }
                }
                Op::WeightedSqError { pred, target, weights } => {
                    let p = nodes[pred.0].value.data();
                    if let Some(gp) = slot(&mut grads, nodes, *pred) {
                        for j in 0..p.len() {
                            gp[j] += g[0] * 2.0 * weights[j] * (p[j] - target[j]);
                        }
                    }
                }
                Op::CrossEntropy { logits, labels } => {
                    let lv = nodes[logits.0].value.data();
                    let c = nodes[logits.0].value.cols();
                    let m = labels.len() as f64;
                    if let Some(gl) = slot(&mut grads, nodes, *logits) {
                        let mut probs = lv.to_vec();
                        softmax_rows_in_place(&mut probs, c, 1.0);
                        for (r, &y) in labels.iter().enumerate() {
                            for j in 0..c {
                                let target = if j == y { 1.0 } else { 0.0 };
                                gl[r * c + j] += g[0] * (probs[r * c + j] - target) / m;
                            }
                        }
                    }
                }
            }
        }
        let shapes = nodes[..n_nodes].iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }
}

/// Recomputes attention probabilities per segment/head instead of storing them,
/// which keeps memory linear in sequence length.
fn attention_backward(
    g: &[f64],
    q: &[f64],
    k: &[f64],
    v: &[f64],
    d: usize,
    segments: &[Segment],
    n_heads: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dq = vec![0.0; q.len()];
    let mut dk = vec![0.0; k.len()];
    let mut dv = vec![0.0; v.len()];
    let mut p = Vec::new();
    let mut dp = Vec::new();
    for s in segments {
        let len = s.len;
        if len == 0 {
            continue;
        }
        p.resize(len * len, 0.0);
        dp.resize(len * len, 0.0);
        for h in 0..n_heads {
            let off = s.start * d + h * dh;
            gemm(len, dh, len, 1.0, &q[off..], d, 1, &k[off..], 1, d, 0.0, &mut p, len, 1);
            softmax_rows_in_place(&mut p, len, scale);
            // dV += Pᵀ dO
            gemm(len, len, dh, 1.0, &p, 1, len, &g[off..], d, 1, 1.0, &mut dv[off..], d, 1);
            // dP = dO Vᵀ
            gemm(len, dh, len, 1.0, &g[off..], d, 1, &v[off..], 1, d, 0.0, &mut dp, len, 1);
            for (prow, dprow) in p.chunks(len).zip(dp.chunks_mut(len)) {
                let dot: f64 = prow.iter().zip(dprow.iter()).map(|(a, b)| a * b).sum();
                for j in 0..len {
                    dprow[j] = prow[j] * (dprow[j] - dot) * scale;
                }
            }
            // dQ += dS K ; dK += dSᵀ Q
            gemm(len, len, dh, 1.0, &dp, len, 1, &k[off..], d, 1, 1.0, &mut dq[off..], d, 1);
            gemm(len, len, dh, 1.0, &dp, 1, len, &q[off..], d, 1, 1.0, &mut dk[off..], d, 1);
        }
    }
    (dq, dk, dv)
}
