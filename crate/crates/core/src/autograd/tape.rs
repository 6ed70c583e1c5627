//! Reverse-mode differentiation over a per-pass tape.
//!
//! Every operation appends a node whose parents already live on the tape, so
//! node order is a topological order and the backward sweep is a single
//! reverse scan. A tape is built for one forward pass and dropped after
//! `backward`; parameters can be borrowed onto it without copying.

use std::borrow::Cow;

use super::Tensor;
use crate::error::{Error, Result};
use crate::rng::RngState;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Affine { x: Var, w: Var, b: Var },
    Relu { x: Var },
    Dropout { x: Var, mask: Vec<f64> },
    Concat { parts: Vec<Var> },
    Gather { table: Var, indices: Vec<usize> },
    Mse { pred: Var, target: Var },
    MulAdd { base: Var, weight: Var, time: Var },
    Scale { x: Var, factor: f64 },
}

#[derive(Debug)]
struct Node<'a> {
    value: Cow<'a, Tensor>,
    grad: Option<Vec<f64>>,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(Cow::Owned(value), Op::Leaf, requires_grad)
    }

    /// Leaf that borrows its value instead of copying it.
    pub fn leaf_ref(&mut self, value: &'a Tensor, requires_grad: bool) -> Var {
        self.push(Cow::Borrowed(value), Op::Leaf, requires_grad)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient, if `backward` has reached this node.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Vec<f64>> {
        self.nodes[v.0].grad.take()
    }

    fn push(&mut self, value: Cow<'a, Tensor>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// `x · w + b` for `x: n×k`, `w: k×m`, `b: 1×m`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if !xv.is_matrix() || !wv.is_matrix() || xv.cols() != wv.rows() {
            return Err(Error::dim("affine", xv.shape(), wv.shape()));
        }
        if bv.len() != wv.cols() || bv.rows() != 1 {
            return Err(Error::dim("affine bias", wv.shape(), bv.shape()));
        }
        let (n, k, m) = (xv.rows(), xv.cols(), wv.cols());
        let mut out = Vec::with_capacity(n * m);
        for _ in 0..n {
            out.extend_from_slice(bv.data());
        }
        gemm(n, k, m, xv.data(), false, wv.data(), false, &mut out);
        let value = Tensor::matrix(n, m, out)?;
        let rg = self.any_grad(&[x, w, b]);
        Ok(self.push(Cow::Owned(value), Op::Affine { x, w, b }, rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let data = xv.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        let value = Tensor::new(xv.shape().to_vec(), data).expect("same shape");
        let rg = self.any_grad(&[x]);
        self.push(Cow::Owned(value), Op::Relu { x }, rg)
    }

    /// Inverted dropout: in training mode each element is zeroed with
    /// probability `p` and survivors are scaled by `1 / (1 - p)`. In eval
    /// mode (or with `p == 0`) the input node itself is returned.
    pub fn dropout(&mut self, x: Var, p: f64, mode: Mode, rng: &mut RngState) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Parameter(format!("dropout probability {p} outside [0, 1)")));
        }
        if mode == Mode::Eval || p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let xv = self.value(x);
        let mask: Vec<f64> = (0..xv.len())
            .map(|_| if rng.uniform() < p { 0.0 } else { keep })
            .collect();
        let data = xv.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::new(xv.shape().to_vec(), data)?;
        let rg = self.any_grad(&[x]);
        Ok(self.push(Cow::Owned(value), Op::Dropout { x, mask }, rg))
    }

    /// Appends columns of equal-height matrices in argument order.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Parameter("concat of zero parts".into()));
        };
        let n = self.value(first).rows();
        for &p in parts {
            let pv = self.value(p);
            if !pv.is_matrix() || pv.rows() != n {
                return Err(Error::dim("concat_cols", self.value(first).shape(), pv.shape()));
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Vec::with_capacity(n * total);
        for i in 0..n {
            for &p in parts {
                let pv = self.value(p);
                let c = pv.cols();
                out.extend_from_slice(&pv.data()[i * c..(i + 1) * c]);
            }
        }
        let value = Tensor::matrix(n, total, out)?;
        let rg = self.any_grad(parts);
        Ok(self.push(Cow::Owned(value), Op::Concat { parts: parts.to_vec() }, rg))
    }

    /// Row lookup: output row `i` is `table[indices[i]]`.
    pub fn embed_gather(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let tv = self.value(table);
        if !tv.is_matrix() {
            return Err(Error::dim("embed_gather", tv.shape(), &[indices.len()]));
        }
        let (vocab, d) = (tv.rows(), tv.cols());
        let mut out = Vec::with_capacity(indices.len() * d);
        for &ix in indices {
            if ix >= vocab {
                return Err(Error::OutOfVocabulary { index: ix, vocab });
            }
            out.extend_from_slice(&tv.data()[ix * d..(ix + 1) * d]);
        }
        let value = Tensor::matrix(indices.len(), d, out)?;
        let rg = self.any_grad(&[table]);
        Ok(self.push(
            Cow::Owned(value),
            Op::Gather {
                table,
                indices: indices.to_vec(),
            },
            rg,
        ))
    }

    /// Mean of squared differences, as a scalar.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (pv, tv) = (self.value(pred), self.value(target));
        if pv.shape() != tv.shape() {
            return Err(Error::dim("mse_loss", pv.shape(), tv.shape()));
        }
        if pv.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = pv.len() as f64;
        let sum: f64 = pv.data().iter().zip(tv.data()).map(|(p, t)| (p - t) * (p - t)).sum();
        let rg = self.any_grad(&[pred, target]);
        Ok(self.push(Cow::Owned(Tensor::scalar(sum / n)), Op::Mse { pred, target }, rg))
    }

    /// `base + weight ⊙ time`, the trend-term composition.
    pub fn scalar_mul_add(&mut self, base: Var, weight: Var, time: Var) -> Result<Var> {
        let (bv, wv, tv) = (self.value(base), self.value(weight), self.value(time));
        if bv.shape() != wv.shape() {
            return Err(Error::dim("scalar_mul_add", bv.shape(), wv.shape()));
        }
        if bv.shape() != tv.shape() {
            return Err(Error::dim("scalar_mul_add", bv.shape(), tv.shape()));
        }
        let data = bv
            .data()
            .iter()
            .zip(wv.data())
            .zip(tv.data())
            .map(|((b, w), t)| b + w * t)
            .collect();
        let value = Tensor::new(bv.shape().to_vec(), data)?;
        let rg = self.any_grad(&[base, weight, time]);
        Ok(self.push(Cow::Owned(value), Op::MulAdd { base, weight, time }, rg))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let xv = self.value(x);
        let data = xv.data().iter().map(|v| v * factor).collect();
        let value = Tensor::new(xv.shape().to_vec(), data).expect("same shape");
        let rg = self.any_grad(&[x]);
        self.push(Cow::Owned(value), Op::Scale { x, factor }, rg)
    }

    /// Adds `d loss / d node` into the gradient buffer of every
    /// `requires_grad` node reachable from `loss`. Calling twice without
    /// clearing accumulates.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::NonScalar(lv.shape().to_vec()));
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        let mut adj: Vec<Option<Vec<f64>>> = Vec::new();
        adj.resize_with(loss.0 + 1, || None);
        adj[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            self.propagate(i, &g, &mut adj);
            let node = &mut self.nodes[i];
            match &mut node.grad {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, d)| *a += d),
                None => node.grad = Some(g),
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        match &nodes[i].op {
            Op::Leaf => {}
            Op::Affine { x, w, b } => {
                let (xv, wv) = (&nodes[x.0].value, &nodes[w.0].value);
                let (n, k, m) = (xv.rows(), xv.cols(), wv.cols());
                if let Some(dx) = slot(nodes, adj, *x) {
                    gemm(n, m, k, g, false, wv.data(), true, dx);
                }
                if let Some(dw) = slot(nodes, adj, *w) {
                    gemm(k, n, m, xv.data(), true, g, false, dw);
                }
                if let Some(db) = slot(nodes, adj, *b) {
                    for row in g.chunks_exact(m) {
                        db.iter_mut().zip(row).for_each(|(a, d)| *a += d);
                    }
                }
            }
            Op::Relu { x } => {
                if let Some(dx) = slot(nodes, adj, *x) {
                    for ((a, d), v) in dx.iter_mut().zip(g).zip(nodes[x.0].value.data()) {
                        if *v > 0.0 {
                            *a += d;
                        }
                    }
                }
            }
            Op::Dropout { x, mask } => {
                if let Some(dx) = slot(nodes, adj, *x) {
                    for ((a, d), m) in dx.iter_mut().zip(g).zip(mask) {
                        *a += d * m;
                    }
                }
            }
            Op::Concat { parts } => {
                let total = nodes[i].value.cols();
                let n = nodes[i].value.rows();
                let mut offset = 0;
                for p in parts {
                    let c = nodes[p.0].value.cols();
                    if let Some(dp) = slot(nodes, adj, *p) {
                        for r in 0..n {
                            let src = &g[r * total + offset..r * total + offset + c];
                            dp[r * c..(r + 1) * c].iter_mut().zip(src).for_each(|(a, d)| *a += d);
                        }
                    }
                    offset += c;
                }
            }
            Op::Gather { table, indices } => {
                if let Some(dt) = slot(nodes, adj, *table) {
                    let d = nodes[table.0].value.cols();
                    for (r, &ix) in indices.iter().enumerate() {
                        dt[ix * d..(ix + 1) * d]
                            .iter_mut()
                            .zip(&g[r * d..(r + 1) * d])
                            .for_each(|(a, v)| *a += v);
                    }
                }
            }
            Op::Mse { pred, target } => {
                let (pv, tv) = (nodes[pred.0].value.data(), nodes[target.0].value.data());
                let scale = 2.0 * g[0] / pv.len() as f64;
                if let Some(dp) = slot(nodes, adj, *pred) {
                    for ((a, p), t) in dp.iter_mut().zip(pv).zip(tv) {
                        *a += scale * (p - t);
                    }
                }
                if let Some(dt) = slot(nodes, adj, *target) {
                    for ((a, p), t) in dt.iter_mut().zip(pv).zip(tv) {
                        *a -= scale * (p - t);
                    }
                }
            }
            Op::MulAdd { base, weight, time } => {
                if let Some(db) = slot(nodes, adj, *base) {
                    db.iter_mut().zip(g).for_each(|(a, d)| *a += d);
                }
                if let Some(dw) = slot(nodes, adj, *weight) {
                    let t = nodes[time.0].value.data();
                    for ((a, d), tv) in dw.iter_mut().zip(g).zip(t) {
                        *a += d * tv;
                    }
                }
                if let Some(dt) = slot(nodes, adj, *time) {
                    let w = nodes[weight.0].value.data();
                    for ((a, d), wv) in dt.iter_mut().zip(g).zip(w) {
                        *a += d * wv;
                    }
                }
            }
            Op::Scale { x, factor } => {
                if let Some(dx) = slot(nodes, adj, *x) {
                    dx.iter_mut().zip(g).for_each(|(a, d)| *a += d * factor);
                }
            }
        }
    }
}

fn slot<'s>(nodes: &[Node<'_>], adj: &'s mut [Option<Vec<f64>>], v: Var) -> Option<&'s mut Vec<f64>> {
    if !nodes[v.0].requires_grad {
        return None;
    }
    let len = nodes[v.0].value.len();
    Some(adj[v.0].get_or_insert_with(|| vec![0.0; len]))
}

/// `c += a · b` with `a: m×k`, `b: k×n`, `c: m×n`, all row-major. A `true`
/// transpose flag means the slice holds the transpose of the operand.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: slice lengths were checked against the strides above.
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
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
