//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Each operation
//! stores its output value and the handles of its inputs; [`Tape::backward`]
//! walks the record in reverse and accumulates adjoints. Tapes are cheap to
//! build and are rebuilt on every forward pass, so graph topology may differ
//! between calls.
//!
//! All values are rank-2 (`rows x cols`). Shape misuse is a programming
//! error and panics; callers that accept external input validate shapes
//! before recording.

use std::sync::atomic::{AtomicU32, Ordering};

use super::params::ParameterStore;
use super::tensor::Tensor;
use crate::error::{Result, SculptError};

static NEXT_TAPE_ID: AtomicU32 = AtomicU32::new(1);

/// Handle to a value recorded on a particular tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u32,
    idx: u32,
}

impl Var {
    pub fn index(self) -> usize {
        self.idx as usize
    }
}

#[derive(Debug, Clone)]
pub struct RbfBasis {
    pub centers: Vec<f64>,
    pub width: f64,
}

#[derive(Debug)]
enum Op {
    Constant,
    Param,
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Silu(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    ScatterAddRows(Var, Vec<usize>),
    SegmentSoftmax(Var, Vec<usize>, usize),
    HeadDot(Var, Var, usize),
    HeadScale(Var, Var, usize),
    ColScale(Var, Var),
    RowNorm(Var),
    Rbf(Var, RbfBasis),
    BlockPlace(Var, Vec<usize>),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    LogSumExpRows(Var),
    SumAll(Var),
    MeanCols(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Recorded computation.
#[derive(Debug)]
pub struct Tape {
    id: u32,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
    fault: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `c = a * b` (+ `c` when `accumulate`), optionally transposing inputs.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    // a is m x k (stored k x m when transposed), b is k x n (stored n x k).
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    if k == 0 {
        if !accumulate {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        return;
    }
    // SAFETY: slice lengths cover the strided extents computed above.
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

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            param_vars: Vec::new(),
            fault: false,
        }
    }

    /// Corrupts the SiLU backward rule. Used to confirm that gradient checks
    /// detect broken derivatives.
    pub fn inject_backward_fault(&mut self) {
        self.fault = true;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let idx = self.nodes.len() as u32;
        self.nodes.push(Node { value, op });
        Var { tape: self.id, idx }
    }

    fn node(&self, v: Var) -> &Node {
        assert_eq!(v.tape, self.id, "variable recorded on a different tape");
        &self.nodes[v.idx as usize]
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.node(v).value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let t = self.value(v);
        assert_eq!(t.len(), 1, "not a scalar");
        t.data()[0]
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        let t = self.value(v);
        (t.rows(), t.cols())
    }

    /// Records a value that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        let value = if value.shape().len() == 2 {
            value
        } else {
            let (r, c) = (value.rows(), value.cols());
            Tensor::matrix(r, c, value.into_data())
        };
        self.push(value, Op::Constant)
    }

    /// Records (once per tape) the named trainable parameter.
    pub fn param(&mut self, store: &ParameterStore, name: &str) -> Result<Var> {
        let index = store
            .index_of(name)
            .ok_or_else(|| SculptError::config(format!("unknown parameter {name:?}")))?;
        Ok(self.param_at(store, index))
    }

    pub fn param_at(&mut self, store: &ParameterStore, index: usize) -> Var {
        if self.param_vars.len() < store.len() {
            self.param_vars.resize(store.len(), None);
        }
        if let Some(v) = self.param_vars[index] {
            return v;
        }
        let t = store.value_at(index);
        let value = Tensor::matrix(t.rows(), t.cols(), t.data().to_vec());
        let v = self.push(value, Op::Param);
        self.param_vars[index] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        assert_eq!(k, k2, "matmul inner dimensions");
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            false,
            self.value(b).data(),
            false,
            &mut out,
            false,
        );
        self.push(Tensor::matrix(m, n, out), Op::MatMul(a, b))
    }

    /// `a + b` with the single row `b` broadcast over every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(self.shape(b), (1, c), "add_row bias shape");
        let bias = self.value(b).data().to_vec();
        let mut out = self.value(a).data().to_vec();
        for row in out.chunks_exact_mut(c.max(1)) {
            for (o, b) in row.iter_mut().zip(&bias) {
                *o += b;
            }
        }
        self.push(Tensor::matrix(r, c, out), Op::AddRow(a, b))
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(self.shape(b), (r, c), "elementwise shapes");
        let out = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        self.push(Tensor::matrix(r, c, out), op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let (r, c) = self.shape(a);
        let out = self.value(a).data().iter().map(|x| x * s).collect();
        self.push(Tensor::matrix(r, c, out), Op::Scale(a, s))
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let out = self.value(a).data().iter().map(|&x| x * sigmoid(x)).collect();
        self.push(Tensor::matrix(r, c, out), Op::Silu(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let r = self.shape(parts[0]).0;
        let widths: Vec<usize> = parts
            .iter()
            .map(|&p| {
                let (pr, pc) = self.shape(p);
                assert_eq!(pr, r, "concat_cols row counts");
                pc
            })
            .collect();
        let total: usize = widths.iter().sum();
        let mut out = vec![0.0; r * total];
        let mut offset = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let src = self.value(p).data();
            for i in 0..r {
                out[i * total + offset..i * total + offset + w].copy_from_slice(&src[i * w..(i + 1) * w]);
            }
            offset += w;
        }
        self.push(Tensor::matrix(r, total, out), Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let c = self.shape(parts[0]).1;
        let mut out = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let (pr, pc) = self.shape(p);
            assert_eq!(pc, c, "concat_rows column counts");
            out.extend_from_slice(self.value(p).data());
            rows += pr;
        }
        self.push(Tensor::matrix(rows, c, out), Op::ConcatRows(parts.to_vec()))
    }

    /// Output row `e` is input row `index[e]`.
    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Var {
        let (r, c) = self.shape(a);
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(index.len() * c);
        for &i in index {
            assert!(i < r, "gather index {i} out of {r} rows");
            out.extend_from_slice(&src[i * c..(i + 1) * c]);
        }
        self.push(Tensor::matrix(index.len(), c, out), Op::GatherRows(a, index.to_vec()))
    }

    /// Output row `i` is the sum of input rows `e` with `index[e] == i`.
    pub fn scatter_add_rows(&mut self, a: Var, index: &[usize], rows: usize) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(r, index.len(), "scatter index length");
        let src = self.value(a).data();
        let mut out = vec![0.0; rows * c];
        for (e, &i) in index.iter().enumerate() {
            assert!(i < rows, "scatter index {i} out of {rows} rows");
            for k in 0..c {
                out[i * c + k] += src[e * c + k];
            }
        }
        self.push(Tensor::matrix(rows, c, out), Op::ScatterAddRows(a, index.to_vec()))
    }

    /// Softmax over the rows that share a segment id, independently per
    /// column. Used to normalize attention over each node's in-edges.
    pub fn segment_softmax(&mut self, a: Var, segment: &[usize], segments: usize) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(r, segment.len(), "segment index length");
        let src = self.value(a).data();
        let mut max = vec![f64::NEG_INFINITY; segments * c];
        for (e, &s) in segment.iter().enumerate() {
            for k in 0..c {
                let m = &mut max[s * c + k];
                *m = m.max(src[e * c + k]);
            }
        }
        let mut out = vec![0.0; r * c];
        let mut sum = vec![0.0; segments * c];
        for (e, &s) in segment.iter().enumerate() {
            for k in 0..c {
                let v = (src[e * c + k] - max[s * c + k]).exp();
                out[e * c + k] = v;
                sum[s * c + k] += v;
            }
        }
        for (e, &s) in segment.iter().enumerate() {
            for k in 0..c {
                out[e * c + k] /= sum[s * c + k];
            }
        }
        self.push(
            Tensor::matrix(r, c, out),
            Op::SegmentSoftmax(a, segment.to_vec(), segments),
        )
    }

    /// Per-head dot products: `(E, H*w) x (E, H*w) -> (E, H)`.
    pub fn head_dot(&mut self, q: Var, k: Var, heads: usize) -> Var {
        let (r, c) = self.shape(q);
        assert_eq!(self.shape(k), (r, c), "head_dot shapes");
        assert_eq!(c % heads, 0, "width not divisible by heads");
        let w = c / heads;
        let (qd, kd) = (self.value(q).data(), self.value(k).data());
        let mut out = vec![0.0; r * heads];
        for e in 0..r {
            for h in 0..heads {
                let base = e * c + h * w;
                out[e * heads + h] = (0..w).map(|i| qd[base + i] * kd[base + i]).sum();
            }
        }
        self.push(Tensor::matrix(r, heads, out), Op::HeadDot(q, k, heads))
    }

    /// Scales each head block of `v` (E, H*w) by the matching column of `a` (E, H).
    pub fn head_scale(&mut self, a: Var, v: Var, heads: usize) -> Var {
        let (r, c) = self.shape(v);
        assert_eq!(self.shape(a), (r, heads), "head_scale weights shape");
        let w = c / heads;
        let (ad, vd) = (self.value(a).data(), self.value(v).data());
        let mut out = vec![0.0; r * c];
        for e in 0..r {
            for k in 0..c {
                out[e * c + k] = ad[e * heads + k / w] * vd[e * c + k];
            }
        }
        self.push(Tensor::matrix(r, c, out), Op::HeadScale(a, v, heads))
    }

    /// Scales row `e` of `a` by the scalar `s[e]` (s has one column).
    pub fn col_scale(&mut self, s: Var, a: Var) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(self.shape(s), (r, 1), "col_scale factor shape");
        let (sd, ad) = (self.value(s).data(), self.value(a).data());
        let mut out = vec![0.0; r * c];
        for e in 0..r {
            for k in 0..c {
                out[e * c + k] = sd[e] * ad[e * c + k];
            }
        }
        self.push(Tensor::matrix(r, c, out), Op::ColScale(s, a))
    }

    /// Euclidean norm of every row. The gradient at a zero row is zero.
    pub fn row_norm(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let ad = self.value(a).data();
        let out = (0..r)
            .map(|e| ad[e * c..(e + 1) * c].iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        self.push(Tensor::matrix(r, 1, out), Op::RowNorm(a))
    }

    /// Gaussian radial expansion of a column of distances.
    pub fn rbf(&mut self, d: Var, basis: &RbfBasis) -> Var {
        let (r, c) = self.shape(d);
        assert_eq!(c, 1, "rbf expects a distance column");
        let g = basis.centers.len();
        let dd = self.value(d).data();
        let inv = 1.0 / (2.0 * basis.width * basis.width);
        let mut out = vec![0.0; r * g];
        for e in 0..r {
            for (k, &ck) in basis.centers.iter().enumerate() {
                let z = dd[e] - ck;
                out[e * g + k] = (-z * z * inv).exp();
            }
        }
        self.push(Tensor::matrix(r, g, out), Op::Rbf(d, basis.clone()))
    }

    /// Places row `e` of `a` (E, g) into column block `block[e]` of a
    /// zero (E, blocks*g) matrix: the flattened outer product of a one-hot
    /// row with `a`.
    pub fn block_place(&mut self, a: Var, block: &[usize], blocks: usize) -> Var {
        let (r, g) = self.shape(a);
        assert_eq!(block.len(), r, "block index length");
        let ad = self.value(a).data();
        let width = blocks * g;
        let mut out = vec![0.0; r * width];
        for (e, &b) in block.iter().enumerate() {
            assert!(b < blocks, "block index out of range");
            out[e * width + b * g..e * width + (b + 1) * g].copy_from_slice(&ad[e * g..(e + 1) * g]);
        }
        self.push(Tensor::matrix(r, width, out), Op::BlockPlace(a, block.to_vec()))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let mut out = self.value(a).data().to_vec();
        for row in out.chunks_exact_mut(c) {
            softmax_in_place(row);
        }
        self.push(Tensor::matrix(r, c, out), Op::SoftmaxRows(a))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let mut out = self.value(a).data().to_vec();
        for row in out.chunks_exact_mut(c) {
            let lse = log_sum_exp(row);
            row.iter_mut().for_each(|v| *v -= lse);
        }
        self.push(Tensor::matrix(r, c, out), Op::LogSoftmaxRows(a))
    }

    /// Row-wise log-sum-exp. Entries equal to `-inf` contribute nothing.
    pub fn log_sum_exp_rows(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let ad = self.value(a).data();
        let out = (0..r).map(|e| log_sum_exp(&ad[e * c..(e + 1) * c])).collect();
        self.push(Tensor::matrix(r, 1, out), Op::LogSumExpRows(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(a))
    }

    /// Mean across columns: (E, c) -> (E, 1).
    pub fn mean_cols(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let ad = self.value(a).data();
        let out = (0..r)
            .map(|e| ad[e * c..(e + 1) * c].iter().sum::<f64>() / c as f64)
            .collect();
        self.push(Tensor::matrix(r, 1, out), Op::MeanCols(a))
    }

    /// Sum of squares of every element.
    pub fn sum_squares(&mut self, a: Var) -> Var {
        let sq = self.mul(a, a);
        self.sum(sq)
    }

    /// Propagates adjoints from the scalar `loss` back to every recorded
    /// value.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if loss.tape != self.id || loss.index() >= self.nodes.len() {
            return Err(SculptError::numeric(
                "gradient requested for a variable outside the recorded graph",
            ));
        }
        if self.value(loss).len() != 1 {
            return Err(SculptError::dimension("backward", "scalar loss", format!("{:?}", self.value(loss).shape())));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.index()] = Some(Tensor::matrix(1, 1, vec![1.0]));
        for idx in (0..=loss.index()).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.backward_node(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            tape: self.id,
            grads,
            params: self
                .param_vars
                .iter()
                .enumerate()
                .filter_map(|(i, v)| v.map(|v| (i, v.index())))
                .collect(),
        })
    }

    fn backward_node(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        let gd = g.data();
        let acc = |grads: &mut [Option<Tensor>], v: Var, delta: &dyn Fn(&mut [f64])| {
            let slot = &mut grads[v.index()];
            if slot.is_none() {
                let t = &self.nodes[v.index()].value;
                *slot = Some(Tensor::matrix(t.rows(), t.cols(), vec![0.0; t.len()]));
            }
            delta(slot.as_mut().unwrap().data_mut());
        };
        match &node.op {
            Op::Constant | Op::Param => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.shape(*a);
                let n = self.shape(*b).1;
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                acc(grads, *a, &|ga| gemm(m, n, k, gd, false, bd, true, ga, true));
                acc(grads, *b, &|gb| gemm(k, m, n, ad, true, gd, false, gb, true));
            }
            Op::AddRow(a, b) => {
                let c = self.shape(*a).1;
                acc(grads, *a, &|ga| add_into(ga, gd));
                acc(grads, *b, &|gb| {
                    for row in gd.chunks_exact(c) {
                        add_into(gb, row);
                    }
                });
            }
            Op::Add(a, b) => {
                acc(grads, *a, &|ga| add_into(ga, gd));
                acc(grads, *b, &|gb| add_into(gb, gd));
            }
            Op::Sub(a, b) => {
                acc(grads, *a, &|ga| add_into(ga, gd));
                acc(grads, *b, &|gb| gb.iter_mut().zip(gd).for_each(|(x, y)| *x -= y));
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                acc(grads, *a, &|ga| {
                    for i in 0..ga.len() {
                        ga[i] += gd[i] * bd[i];
                    }
                });
                acc(grads, *b, &|gb| {
                    for i in 0..gb.len() {
                        gb[i] += gd[i] * ad[i];
                    }
                });
            }
            Op::Scale(a, s) => acc(grads, *a, &|ga| {
                ga.iter_mut().zip(gd).for_each(|(x, y)| *x += s * y)
            }),
            Op::Silu(a) => {
                let ad = self.value(*a).data();
                let fault = if self.fault { 1.1 } else { 1.0 };
                acc(grads, *a, &|ga| {
                    for i in 0..ga.len() {
                        let s = sigmoid(ad[i]);
                        ga[i] += fault * gd[i] * s * (1.0 + ad[i] * (1.0 - s));
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let (r, total) = (g.rows(), g.cols());
                let mut offset = 0;
                for &p in parts {
                    let w = self.shape(p).1;
                    acc(grads, p, &|gp| {
                        for i in 0..r {
                            add_into(&mut gp[i * w..(i + 1) * w], &gd[i * total + offset..i * total + offset + w]);
                        }
                    });
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let c = g.cols();
                let mut offset = 0;
                for &p in parts {
                    let r = self.shape(p).0;
                    acc(grads, p, &|gp| add_into(gp, &gd[offset * c..(offset + r) * c]));
                    offset += r;
                }
            }
            Op::GatherRows(a, index) => {
                let c = g.cols();
                acc(grads, *a, &|ga| {
                    for (e, &i) in index.iter().enumerate() {
                        add_into(&mut ga[i * c..(i + 1) * c], &gd[e * c..(e + 1) * c]);
                    }
                });
            }
            Op::ScatterAddRows(a, index) => {
                let c = g.cols();
                acc(grads, *a, &|ga| {
                    for (e, &i) in index.iter().enumerate() {
                        add_into(&mut ga[e * c..(e + 1) * c], &gd[i * c..(i + 1) * c]);
                    }
                });
            }
            Op::SegmentSoftmax(a, segment, segments) => {
                let c = g.cols();
                let y = node.value.data();
                let mut dot = vec![0.0; segments * c];
                for (e, &s) in segment.iter().enumerate() {
                    for k in 0..c {
                        dot[s * c + k] += y[e * c + k] * gd[e * c + k];
                    }
                }
                acc(grads, *a, &|ga| {
                    for (e, &s) in segment.iter().enumerate() {
                        for k in 0..c {
                            ga[e * c + k] += y[e * c + k] * (gd[e * c + k] - dot[s * c + k]);
                        }
                    }
                });
            }
            Op::HeadDot(q, k, heads) => {
                let (r, c) = self.shape(*q);
                let w = c / heads;
                let (qd, kd) = (self.value(*q).data(), self.value(*k).data());
                acc(grads, *q, &|gq| {
                    for e in 0..r {
                        for i in 0..c {
                            gq[e * c + i] += gd[e * heads + i / w] * kd[e * c + i];
                        }
                    }
                });
                acc(grads, *k, &|gk| {
                    for e in 0..r {
                        for i in 0..c {
                            gk[e * c + i] += gd[e * heads + i / w] * qd[e * c + i];
                        }
                    }
                });
            }
            Op::HeadScale(a, v, heads) => {
                let (r, c) = self.shape(*v);
                let w = c / heads;
                let (ad, vd) = (self.value(*a).data(), self.value(*v).data());
                acc(grads, *a, &|ga| {
                    for e in 0..r {
                        for i in 0..c {
                            ga[e * heads + i / w] += gd[e * c + i] * vd[e * c + i];
                        }
                    }
                });
                acc(grads, *v, &|gv| {
                    for e in 0..r {
                        for i in 0..c {
                            gv[e * c + i] += gd[e * c + i] * ad[e * heads + i / w];
                        }
                    }
                });
            }
            Op::ColScale(s, a) => {
                let (r, c) = self.shape(*a);
                let (sd, ad) = (self.value(*s).data(), self.value(*a).data());
                acc(grads, *s, &|gs| {
                    for e in 0..r {
                        gs[e] += (0..c).map(|i| gd[e * c + i] * ad[e * c + i]).sum::<f64>();
                    }
                });
                acc(grads, *a, &|ga| {
                    for e in 0..r {
                        for i in 0..c {
                            ga[e * c + i] += gd[e * c + i] * sd[e];
                        }
                    }
                });
            }
            Op::RowNorm(a) => {
                let (r, c) = self.shape(*a);
                let ad = self.value(*a).data();
                let n = node.value.data();
                acc(grads, *a, &|ga| {
                    for e in 0..r {
                        if n[e] > 0.0 {
                            for i in 0..c {
                                ga[e * c + i] += gd[e] * ad[e * c + i] / n[e];
                            }
                        }
                    }
                });
            }
            Op::Rbf(d, basis) => {
                let g_count = basis.centers.len();
                let dd = self.value(*d).data();
                let y = node.value.data();
                let inv_w2 = 1.0 / (basis.width * basis.width);
                acc(grads, *d, &|gdst| {
                    for e in 0..gdst.len() {
                        let mut s = 0.0;
                        for (k, &ck) in basis.centers.iter().enumerate() {
                            s += gd[e * g_count + k] * y[e * g_count + k] * (-(dd[e] - ck) * inv_w2);
                        }
                        gdst[e] += s;
                    }
                });
            }
            Op::BlockPlace(a, block) => {
                let g_width = self.shape(*a).1;
                let width = g.cols();
                acc(grads, *a, &|ga| {
                    for (e, &b) in block.iter().enumerate() {
                        add_into(
                            &mut ga[e * g_width..(e + 1) * g_width],
                            &gd[e * width + b * g_width..e * width + (b + 1) * g_width],
                        );
                    }
                });
            }
            Op::SoftmaxRows(a) => {
                let c = g.cols();
                let y = node.value.data();
                acc(grads, *a, &|ga| {
                    for (e, (yr, gr)) in y.chunks_exact(c).zip(gd.chunks_exact(c)).enumerate() {
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for i in 0..c {
                            ga[e * c + i] += yr[i] * (gr[i] - dot);
                        }
                    }
                });
            }
            Op::LogSoftmaxRows(a) => {
                let c = g.cols();
                let y = node.value.data();
                acc(grads, *a, &|ga| {
                    for (e, (yr, gr)) in y.chunks_exact(c).zip(gd.chunks_exact(c)).enumerate() {
                        let total: f64 = gr.iter().sum();
                        for i in 0..c {
                            ga[e * c + i] += gr[i] - yr[i].exp() * total;
                        }
                    }
                });
            }
            Op::LogSumExpRows(a) => {
                let (r, c) = self.shape(*a);
                let ad = self.value(*a).data();
                let lse = node.value.data();
                acc(grads, *a, &|ga| {
                    for e in 0..r {
                        for i in 0..c {
                            let x = ad[e * c + i];
                            if x != f64::NEG_INFINITY {
                                ga[e * c + i] += gd[e] * (x - lse[e]).exp();
                            }
                        }
                    }
                });
            }
            Op::SumAll(a) => acc(grads, *a, &|ga| ga.iter_mut().for_each(|x| *x += gd[0])),
            Op::MeanCols(a) => {
                let (r, c) = self.shape(*a);
                acc(grads, *a, &|ga| {
                    for e in 0..r {
                        for i in 0..c {
                            ga[e * c + i] += gd[e] / c as f64;
                        }
                    }
                });
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Numerically stable log-sum-exp; `-inf` entries are ignored and an
/// all-`-inf` row yields `-inf`.
pub fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = row.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        s += *v;
    }
    row.iter_mut().for_each(|v| *v /= s);
}

/// Adjoints from one backward pass.
#[derive(Debug)]
pub struct Gradients {
    tape: u32,
    grads: Vec<Option<Tensor>>,
    /// (store index, node index) for every recorded parameter.
    params: Vec<(usize, usize)>,
}

impl Gradients {
    /// Adjoint of `v`; zero-shaped `None` means `v` did not influence the loss.
    pub fn get(&self, v: Var) -> Result<Option<&Tensor>> {
        if v.tape != self.tape || v.index() >= self.grads.len() {
            return Err(SculptError::numeric(
                "gradient requested for a variable outside the recorded graph",
            ));
        }
        Ok(self.grads[v.index()].as_ref())
    }

    /// (store index, gradient) for every parameter that reached the loss.
    pub fn params(&self) -> impl Iterator<Item = (usize, &Tensor)> + '_ {
        self.params
            .iter()
            .filter_map(|&(store, node)| self.grads[node].as_ref().map(|g| (store, g)))
    }
}
