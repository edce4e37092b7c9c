//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every op appends one node holding its forward value and enough saved
//! state to run its vector-Jacobian product. [`Tape::backward`] walks the
//! nodes in exact reverse order, summing gradient contributions at fan-out.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::param::{ParamId, ParamStore};
use super::tensor::{as_matrix, kernels, Tensor};
use crate::error::{contract_err, dim_err, Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Vec<f64>),
    Relu(Var),
    Softmax(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Gather { src: Var, idx: Vec<usize> },
    IndexAdd { src: Var, targets: Vec<usize> },
    ConcatRows(Vec<Var>),
    SliceRows { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    SliceCols { x: Var, start: usize },
    ScaleRows { x: Var, factors: Vec<f64> },
    MeanRows { x: Var, rows: Vec<usize> },
    Sum(Var),
    CrossEntropy { logits: Var, targets: Vec<Option<usize>>, probs: Vec<f64>, count: usize },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Which keys a softmax row may attend to.
#[derive(Debug, Clone, Copy, Default)]
pub struct AttentionMask<'a> {
    /// `false` entries are excluded from every row.
    pub keys: Option<&'a [bool]>,
    /// Row `t` may only see columns `<= t`.
    pub causal: bool,
}

/// Sequential record of differentiable operations.
///
/// A tape is single-owner mutable state; distinct tapes are independent.
#[derive(Debug, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    params: BTreeMap<ParamId, Var>,
    record: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), grads: Vec::new(), params: BTreeMap::new(), record: true }
    }

    /// A tape that keeps values only; `backward` is unavailable.
    pub fn no_grad() -> Self {
        Self { record: false, ..Self::new() }
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

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last `backward` target with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let g = self.grads.get(v.0)?.as_ref()?;
        Some(Tensor::new(self.shape(v), g.clone()).expect("grad matches value shape"))
    }

    /// Drops every node from `len` on, invalidating their `Var`s. Parameters
    /// placed before `len` stay memoized.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
        self.grads.clear();
        self.params.retain(|_, v| v.0 < len);
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var], what: &str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(String::from(what)));
        }
        let requires_grad = self.record && inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node { value, op, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(String::from("leaf")));
        }
        let requires_grad = requires_grad && self.record;
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, false)
    }

    /// Places a parameter on the tape; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let value = store.value(id).clone();
        let requires_grad = self.record;
        self.nodes.push(Node { value, op: Op::Param, requires_grad });
        let v = Var(self.nodes.len() - 1);
        self.params.insert(id, v);
        v
    }

    fn mat(&self, v: Var) -> Result<(usize, usize)> {
        as_matrix(&self.nodes[v.0].value)
    }

    fn same_shape(&self, a: Var, b: Var, op: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(dim_err!("{}: shapes {:?} and {:?} differ", op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.mat(a)?;
        let (k2, p) = self.mat(b)?;
        if k != k2 {
            return Err(dim_err!("matmul: {:?} x {:?}", self.shape(a), self.shape(b)));
        }
        let mut out = vec![0.0; m * p];
        kernels::matmul_nn(self.value(a).data(), self.value(b).data(), &mut out, m, k, p);
        self.push(Tensor::new(&[m, p], out)?, Op::MatMul(a, b), &[a, b], "matmul")
    }

    /// `a · bᵀ` for `a: m×k`, `b: n×k`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.mat(a)?;
        let (n, k2) = self.mat(b)?;
        if k != k2 {
            return Err(dim_err!("matmul_nt: {:?} x {:?}ᵀ", self.shape(a), self.shape(b)));
        }
        let mut out = vec![0.0; m * n];
        kernels::matmul_nt(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        self.push(Tensor::new(&[m, n], out)?, Op::MatMulNt(a, b), &[a, b], "matmul_nt")
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(self.shape(a), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let out = self.zip_with(a, b, |x, y| x + y);
        self.push(out, Op::Add(a, b), &[a, b], "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let out = self.zip_with(a, b, |x, y| x - y);
        self.push(out, Op::Sub(a, b), &[a, b], "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let out = self.zip_with(a, b, |x, y| x * y);
        self.push(out, Op::Mul(a, b), &[a, b], "mul")
    }

    /// Adds a length-`c` vector to every row of an `r×c` input.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let cols = self.value(x).cols();
        if self.value(row).numel() != cols {
            return Err(dim_err!("add_row: {:?} + {:?}", self.shape(x), self.shape(row)));
        }
        let mut out = self.value(x).clone();
        let r = self.value(row).data().to_vec();
        for chunk in out.data_mut().chunks_mut(cols.max(1)) {
            for (o, b) in chunk.iter_mut().zip(&r) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow(x, row), &[x, row], "add_row")
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v *= s);
        self.push(out, Op::Scale(x, s), &[x], "scale")
    }

    /// Elementwise product with a constant tensor of identical size
    /// (dropout masks, fixed projections in tests).
    pub fn mul_const(&mut self, x: Var, factors: Vec<f64>) -> Result<Var> {
        if factors.len() != self.value(x).numel() {
            return Err(dim_err!("mul_const: {} factors for {:?}", factors.len(), self.shape(x)));
        }
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().zip(factors.iter()).for_each(|(v, f)| *v *= f);
        self.push(out, Op::MulConst(x, factors), &[x], "mul_const")
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        self.push(out, Op::Relu(x), &[x], "relu")
    }

    /// Softmax along the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        self.softmax_masked(x, AttentionMask::default())
    }

    /// Softmax along the last axis; excluded entries get probability exactly 0.
    pub fn softmax_masked(&mut self, x: Var, mask: AttentionMask<'_>) -> Result<Var> {
        let value = self.value(x);
        let cols = value.cols();
        if cols == 0 {
            return Err(dim_err!("softmax over an empty axis, shape {:?}", value.shape()));
        }
        if let Some(keys) = mask.keys {
            if keys.len() != cols {
                return Err(dim_err!("softmax key mask has {} entries for {} columns", keys.len(), cols));
            }
        }
        let mut out = value.clone();
        for (r, row) in out.data_mut().chunks_mut(cols).enumerate() {
            let allowed = |j: usize| mask.keys.is_none_or(|k| k[j]) && (!mask.causal || j <= r);
            let mut max = f64::NEG_INFINITY;
            for (j, &v) in row.iter().enumerate() {
                if allowed(j) && v > max {
                    max = v;
                }
            }
            if max == f64::NEG_INFINITY {
                return Err(contract_err!("softmax row {} has every key masked", r));
            }
            let mut sum = 0.0;
            for (j, v) in row.iter_mut().enumerate() {
                if allowed(j) {
                    *v = libm::exp(*v - max);
                    sum += *v;
                } else {
                    *v = 0.0;
                }
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }
        self.push(out, Op::Softmax(x), &[x], "softmax")
    }

    /// Normalizes each row to zero mean and unit variance, then applies
    /// `gamma * xhat + beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let d = self.value(x).cols();
        if d == 0 || self.value(gamma).numel() != d || self.value(beta).numel() != d {
            return Err(dim_err!(
                "layer_norm: input {:?}, gamma {:?}, beta {:?}",
                self.shape(x),
                self.shape(gamma),
                self.shape(beta)
            ));
        }
        if eps <= 0.0 {
            return Err(contract_err!("layer_norm eps must be positive, got {}", eps));
        }
        let g = self.value(gamma).data().to_vec();
        let b = self.value(beta).data().to_vec();
        let mut out = self.value(x).clone();
        let mut xhat = vec![0.0; out.numel()];
        let mut inv_std = Vec::with_capacity(out.rows());
        for (row, xh) in out.data_mut().chunks_mut(d).zip(xhat.chunks_mut(d)) {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / libm::sqrt(var + eps);
            for j in 0..d {
                xh[j] = (row[j] - mean) * inv;
                row[j] = g[j] * xh[j] + b[j];
            }
            inv_std.push(inv);
        }
        self.push(out, Op::LayerNorm { x, gamma, beta, xhat, inv_std }, &[x, gamma, beta], "layer_norm")
    }

    /// Row gather: output row `r` is `src[idx[r]]`. Embedding lookup.
    pub fn gather_rows(&mut self, src: Var, idx: &[usize]) -> Result<Var> {
        let (n, d) = self.mat(src)?;
        let mut out = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            if i >= n {
                return Err(dim_err!("gather_rows: index {} out of {} rows", i, n));
            }
            out.extend_from_slice(self.value(src).row(i));
        }
        let t = Tensor::new(&[idx.len(), d], out)?;
        self.push(t, Op::Gather { src, idx: idx.to_vec() }, &[src], "gather_rows")
    }

    /// Scatter-add: output has `n_out` rows and row `targets[r]` receives
    /// `src[r]`. Rows with no incoming source stay zero.
    pub fn index_add_rows(&mut self, src: Var, targets: &[usize], n_out: usize) -> Result<Var> {
        let (m, d) = self.mat(src)?;
        if targets.len() != m {
            return Err(dim_err!("index_add_rows: {} targets for {} rows", targets.len(), m));
        }
        let mut out = Tensor::zeros(&[n_out, d]);
        for (r, &t) in targets.iter().enumerate() {
            if t >= n_out {
                return Err(dim_err!("index_add_rows: target {} out of {} rows", t, n_out));
            }
            let s = self.value(src).row(r);
            for (o, v) in out.row_mut(t).iter_mut().zip(s) {
                *o += v;
            }
        }
        self.push(out, Op::IndexAdd { src, targets: targets.to_vec() }, &[src], "index_add_rows")
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| contract_err!("concat_rows of nothing"))?;
        let (_, d) = self.mat(first)?;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let (r, c) = self.mat(p)?;
            if c != d {
                return Err(dim_err!("concat_rows: width {} vs {}", c, d));
            }
            rows += r;
            data.extend_from_slice(self.value(p).data());
        }
        let t = Tensor::new(&[rows, d], data)?;
        self.push(t, Op::ConcatRows(parts.to_vec()), parts, "concat_rows")
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, d) = self.mat(x)?;
        if start + len > r {
            return Err(dim_err!("slice_rows {}..{} of {} rows", start, start + len, r));
        }
        let data = self.value(x).data()[start * d..(start + len) * d].to_vec();
        let t = Tensor::new(&[len, d], data)?;
        self.push(t, Op::SliceRows { x, start }, &[x], "slice_rows")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| contract_err!("concat_cols of nothing"))?;
        let (rows, _) = self.mat(first)?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.mat(p)?;
            if r != rows {
                return Err(dim_err!("concat_cols: {} rows vs {}", r, rows));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Tensor::zeros(&[rows, total]);
        let mut off = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            for i in 0..rows {
                out.row_mut(i)[off..off + w].copy_from_slice(self.value(p).row(i));
            }
            off += w;
        }
        self.push(out, Op::ConcatCols(parts.to_vec()), parts, "concat_cols")
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (rows, c) = self.mat(x)?;
        if start + len > c {
            return Err(dim_err!("slice_cols {}..{} of {} columns", start, start + len, c));
        }
        let mut data = Vec::with_capacity(rows * len);
        for i in 0..rows {
            data.extend_from_slice(&self.value(x).row(i)[start..start + len]);
        }
        let t = Tensor::new(&[rows, len], data)?;
        self.push(t, Op::SliceCols { x, start }, &[x], "slice_cols")
    }

    /// Multiplies row `i` by the constant `factors[i]`.
    pub fn scale_rows(&mut self, x: Var, factors: &[f64]) -> Result<Var> {
        let (rows, _) = self.mat(x)?;
        if factors.len() != rows {
            return Err(dim_err!("scale_rows: {} factors for {} rows", factors.len(), rows));
        }
        let mut out = self.value(x).clone();
        for (i, &f) in factors.iter().enumerate() {
            out.row_mut(i).iter_mut().for_each(|v| *v *= f);
        }
        self.push(out, Op::ScaleRows { x, factors: factors.to_vec() }, &[x], "scale_rows")
    }

    /// Arithmetic mean of the selected rows, as a `1×d` matrix.
    pub fn mean_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let (n, d) = self.mat(x)?;
        if rows.is_empty() {
            return Err(contract_err!("mean over zero rows"));
        }
        let mut out = vec![0.0; d];
        for &r in rows {
            if r >= n {
                return Err(dim_err!("mean_rows: row {} out of {}", r, n));
            }
            for (o, v) in out.iter_mut().zip(self.value(x).row(r)) {
                *o += v;
            }
        }
        let k = rows.len() as f64;
        out.iter_mut().for_each(|v| *v /= k);
        let t = Tensor::new(&[1, d], out)?;
        self.push(t, Op::MeanRows { x, rows: rows.to_vec() }, &[x], "mean_rows")
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x), &[x], "sum")
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `logits`. Positions equal to `ignore_id` are skipped.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[u32], ignore_id: u32) -> Result<Var> {
        let (t, v) = self.mat(logits)?;
        if targets.len() != t {
            return Err(dim_err!("cross_entropy: {} targets for {} positions", targets.len(), t));
        }
        let mut probs = vec![0.0; t * v];
        let mut total = 0.0;
        let mut count = 0;
        let mut kept = Vec::with_capacity(t);
        for (i, &target) in targets.iter().enumerate() {
            if target == ignore_id {
                kept.push(None);
                continue;
            }
            let target = target as usize;
            if target >= v {
                return Err(dim_err!("cross_entropy: target {} outside vocabulary of {}", target, v));
            }
            let row = self.value(logits).row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|x| libm::exp(x - max)).sum();
            let lse = max + libm::log(sum);
            total += lse - row[target];
            for (p, x) in probs[i * v..(i + 1) * v].iter_mut().zip(row) {
                *p = libm::exp(x - lse);
            }
            count += 1;
            kept.push(Some(target));
        }
        if count == 0 {
            return Err(contract_err!("cross_entropy: every position is ignored, mean is undefined"));
        }
        let loss = Tensor::scalar(total / count as f64);
        self.push(loss, Op::CrossEntropy { logits, targets: kept, probs, count }, &[logits], "cross_entropy")
    }

    /// Back-propagates from a scalar node. Gradients are available through
    /// [`Tape::grad`] and [`Tape::param_grads`] afterwards.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(contract_err!("backward needs a scalar, got shape {:?}", self.shape(loss)));
        }
        if !self.record {
            return Err(contract_err!("backward on a no-grad tape"));
        }
        self.grads = vec![None; self.nodes.len()];
        self.grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = self.grads[idx].take() else { continue };
            if self.nodes[idx].requires_grad {
                self.backprop_node(idx, &g);
            }
            self.grads[idx] = Some(g);
        }
        Ok(())
    }

    fn backprop_node(&mut self, idx: usize, g: &[f64]) {
        let nodes = &self.nodes;
        let grads = &mut self.grads;
        let value = |v: Var| &nodes[v.0].value;
        let mut acc = |v: Var, contrib: &mut dyn FnMut(&mut [f64])| {
            if !nodes[v.0].requires_grad {
                return;
            }
            let n = nodes[v.0].value.numel();
            contrib(grads[v.0].get_or_insert_with(|| vec![0.0; n]));
        };
        match &nodes[idx].op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let (m, k) = (value(*a).rows(), value(*a).cols());
                let p = value(*b).cols();
                let bv = value(*b).data();
                let av = value(*a).data();
                acc(*a, &mut |ga| kernels::matmul_nt(g, bv, ga, m, p, k));
                acc(*b, &mut |gb| kernels::matmul_tn(av, g, gb, m, k, p));
            }
            Op::MatMulNt(a, b) => {
                let (m, k) = (value(*a).rows(), value(*a).cols());
                let n = value(*b).rows();
                let bv = value(*b).data();
                let av = value(*a).data();
                acc(*a, &mut |ga| kernels::matmul_nn(g, bv, ga, m, n, k));
                acc(*b, &mut |gb| kernels::matmul_tn(g, av, gb, m, n, k));
            }
            Op::Add(a, b) => {
                acc(*a, &mut |ga| add_into(ga, g));
                acc(*b, &mut |gb| add_into(gb, g));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |ga| add_into(ga, g));
                acc(*b, &mut |gb| gb.iter_mut().zip(g).for_each(|(o, v)| *o -= v));
            }
            Op::Mul(a, b) => {
                let av = value(*a).data();
                let bv = value(*b).data();
                acc(*a, &mut |ga| {
                    for ((o, gv), y) in ga.iter_mut().zip(g).zip(bv.iter()) {
                        *o += gv * y;
                    }
                });
                acc(*b, &mut |gb| {
                    for ((o, gv), x) in gb.iter_mut().zip(g).zip(av.iter()) {
                        *o += gv * x;
                    }
                });
            }
            Op::AddRow(x, row) => {
                let cols = value(*x).cols().max(1);
                acc(*x, &mut |gx| add_into(gx, g));
                acc(*row, &mut |gr| {
                    for chunk in g.chunks(cols) {
                        add_into(gr, chunk);
                    }
                });
            }
            Op::Scale(x, s) => {
                acc(*x, &mut |gx| gx.iter_mut().zip(g).for_each(|(o, v)| *o += s * v));
            }
            Op::MulConst(x, factors) => {
                acc(*x, &mut |gx| {
                    for ((o, v), f) in gx.iter_mut().zip(g).zip(factors.iter()) {
                        *o += v * f;
                    }
                });
            }
            Op::Relu(x) => {
                let xv = value(*x).data();
                acc(*x, &mut |gx| {
                    for ((o, v), xi) in gx.iter_mut().zip(g).zip(xv.iter()) {
                        if *xi > 0.0 {
                            *o += v;
                        }
                    }
                });
            }
            Op::Softmax(x) => {
                let y = nodes[idx].value.data();
                let cols = nodes[idx].value.cols();
                acc(*x, &mut |gx| {
                    for ((gxr, yr), gr) in gx.chunks_mut(cols).zip(y.chunks(cols)).zip(g.chunks(cols)) {
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..cols {
                            gxr[j] += yr[j] * (gr[j] - dot);
                        }
                    }
                });
            }
            Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                let d = value(*gamma).numel();
                let gm = value(*gamma).data();
                acc(*gamma, &mut |gg| {
                    for (gr, xr) in g.chunks(d).zip(xhat.chunks(d)) {
                        for j in 0..d {
                            gg[j] += gr[j] * xr[j];
                        }
                    }
                });
                acc(*beta, &mut |gb| {
                    for gr in g.chunks(d) {
                        add_into(gb, gr);
                    }
                });
                acc(*x, &mut |gx| {
                    let mut dxhat = vec![0.0; d];
                    for (((gxr, gr), xr), inv) in
                        gx.chunks_mut(d).zip(g.chunks(d)).zip(xhat.chunks(d)).zip(inv_std.iter())
                    {
                        for j in 0..d {
                            dxhat[j] = gr[j] * gm[j];
                        }
                        let mean_d = dxhat.iter().sum::<f64>() / d as f64;
                        let mean_dx = dxhat.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                        for j in 0..d {
                            gxr[j] += inv * (dxhat[j] - mean_d - xr[j] * mean_dx);
                        }
                    }
                });
            }
            Op::Gather { src, idx: rows } => {
                let d = value(*src).cols();
                acc(*src, &mut |gs| {
                    for (r, &i) in rows.iter().enumerate() {
                        add_into(&mut gs[i * d..(i + 1) * d], &g[r * d..(r + 1) * d]);
                    }
                });
            }
            Op::IndexAdd { src, targets } => {
                let d = value(*src).cols();
                acc(*src, &mut |gs| {
                    for (r, &t) in targets.iter().enumerate() {
                        add_into(&mut gs[r * d..(r + 1) * d], &g[t * d..(t + 1) * d]);
                    }
                });
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for p in parts {
                    let n = value(*p).numel();
                    acc(*p, &mut |gp| add_into(gp, &g[off..off + n]));
                    off += n;
                }
            }
            Op::SliceRows { x, start } => {
                let start = *start;
                let d = value(*x).cols();
                acc(*x, &mut |gx| add_into(&mut gx[start * d..start * d + g.len()], g));
            }
            Op::ConcatCols(parts) => {
                let total = nodes[idx].value.cols();
                let mut off = 0;
                for p in parts {
                    let w = value(*p).cols();
                    acc(*p, &mut |gp| {
                        for (gpr, gr) in gp.chunks_mut(w).zip(g.chunks(total)) {
                            add_into(gpr, &gr[off..off + w]);
                        }
                    });
                    off += w;
                }
            }
            Op::SliceCols { x, start } => {
                let start = *start;
                let c = value(*x).cols();
                let w = nodes[idx].value.cols();
                acc(*x, &mut |gx| {
                    for (gxr, gr) in gx.chunks_mut(c).zip(g.chunks(w)) {
                        add_into(&mut gxr[start..start + w], gr);
                    }
                });
            }
            Op::ScaleRows { x, factors } => {
                let d = value(*x).cols();
                acc(*x, &mut |gx| {
                    for ((gxr, gr), f) in gx.chunks_mut(d).zip(g.chunks(d)).zip(factors.iter()) {
                        gxr.iter_mut().zip(gr).for_each(|(o, v)| *o += f * v);
                    }
                });
            }
            Op::MeanRows { x, rows } => {
                let d = value(*x).cols();
                let k = rows.len() as f64;
                acc(*x, &mut |gx| {
                    for &r in rows.iter() {
                        for j in 0..d {
                            gx[r * d + j] += g[j] / k;
                        }
                    }
                });
            }
            Op::Sum(x) => {
                acc(*x, &mut |gx| gx.iter_mut().for_each(|o| *o += g[0]));
            }
            Op::CrossEntropy { logits, targets, probs, count } => {
                let v = value(*logits).cols();
                let scale = g[0] / *count as f64;
                acc(*logits, &mut |gl| {
                    for (i, t) in targets.iter().enumerate() {
                        let Some(t) = *t else { continue };
                        for j in 0..v {
                            let onehot = if j == t { 1.0 } else { 0.0 };
                            gl[i * v + j] += scale * (probs[i * v + j] - onehot);
                        }
                    }
                });
            }
        }
    }

    /// Parameter gradients from the last `backward`, in parameter order.
    pub fn param_grads(&self) -> Vec<(ParamId, Tensor)> {
        self.params
            .iter()
            .filter_map(|(&id, &v)| self.grad(v).map(|g| (id, g)))
            .collect()
    }

    /// Adds this tape's parameter gradients into `store`.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        for (id, g) in self.param_grads() {
            let p = store.get_mut(id);
            match &mut p.grad {
                Some(existing) => add_into(existing.data_mut(), g.data()),
                slot @ None => *slot = Some(g),
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
