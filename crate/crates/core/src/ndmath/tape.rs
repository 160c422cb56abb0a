//! Define-by-run reverse-mode differentiation.
//!
//! Every op appends one node holding its forward value. Nodes are stored in
//! creation order, which is already a topological order, so `backward` is a
//! single reverse sweep.

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    AddRow(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Min(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    LeakyRelu(usize, f64),
    Tanh(usize),
    Exp(usize),
    Ln(usize),
    Square(usize),
    Clamp(usize, f64, f64),
    LogSigmoid(usize, f64),
    GroupSum(usize, Vec<usize>),
    SliceRows(usize, usize),
    SliceCols(usize, usize),
    ConcatCols(usize, usize),
    RowSum(usize),
    Sum(usize),
    Mean(usize),
    Dot(usize, Vec<f64>),
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

/// Gradients of one scalar with respect to every differentiable node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `var`, or `None` if the loss does not depend on it.
    pub fn get(&self, var: Var) -> Option<Tensor> {
        let g = self.grads.get(var.0)?.as_ref()?;
        Tensor::new(self.shapes[var.0].clone(), g.clone()).ok()
    }

    /// Gradients for `vars`, zero-filled for untouched entries.
    pub fn collect(&self, vars: &[Var]) -> Vec<Tensor> {
        vars.iter()
            .map(|&v| {
                self.get(v).unwrap_or_else(|| {
                    let shape = self.shapes[v.0].clone();
                    let n = shape.iter().product();
                    Tensor::new(shape, vec![0.0; n]).expect("consistent shape")
                })
            })
            .collect()
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

/// `ln(sigmoid(x))` without overflow for large `|x|`.
pub fn log_sigmoid(x: f64) -> f64 {
    -((-x).max(0.0) + (-x.abs()).exp().ln_1p())
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Differentiable leaf (a parameter).
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Non-differentiable leaf (an input or a frozen parameter).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a.0, b.0), rg))
    }

    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let value = self.value(x).add_row(self.value(bias))?;
        let rg = self.rg(x) || self.rg(bias);
        Ok(self.push(value, Op::AddRow(x.0, bias.0), rg))
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), f)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Add(a.0, b.0), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Sub(a.0, b.0), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Mul(a.0, b.0), |x, y| x * y)
    }

    /// Elementwise minimum; ties route the gradient to `a`.
    pub fn min(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Min(a.0, b.0), f64::min)
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let value = self.value(x).map(f);
        let rg = self.rg(x);
        self.push(value, op, rg)
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        self.unary(x, Op::Scale(x.0, k), |v| v * k)
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.scale(x, -1.0)
    }

    pub fn add_scalar(&mut self, x: Var, k: f64) -> Var {
        self.unary(x, Op::AddScalar(x.0), |v| v + k)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let value = self.value(x).leaky_relu(slope);
        let rg = self.rg(x);
        self.push(value, Op::LeakyRelu(x.0, slope), rg)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).tanh();
        let rg = self.rg(x);
        self.push(value, Op::Tanh(x.0), rg)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, Op::Exp(x.0), f64::exp)
    }

    /// Natural log; inputs must be positive.
    pub fn ln(&mut self, x: Var) -> Var {
        self.unary(x, Op::Ln(x.0), f64::ln)
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(x, Op::Square(x.0), |v| v * v)
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where clamping is active.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        self.unary(x, Op::Clamp(x.0, lo, hi), |v| v.clamp(lo, hi))
    }

    /// `max(ln sigmoid(x), ln floor)`, gradient zero below the floor.
    pub fn log_sigmoid(&mut self, x: Var, floor: f64) -> Var {
        let lf = floor.ln();
        self.unary(x, Op::LogSigmoid(x.0, floor), |v| log_sigmoid(v).max(lf))
    }

    /// Sums consecutive row groups of the given sizes, `[sum(sizes), c] -> [groups, c]`.
    pub fn group_sum(&mut self, x: Var, sizes: &[usize]) -> Result<Var> {
        let input = self.value(x);
        let total: usize = sizes.iter().sum();
        if total != input.rows() {
            return Err(Error::dim(format!(
                "group sizes cover {total} rows, input has {}",
                input.rows()
            )));
        }
        let c = input.cols();
        let mut out = vec![0.0; sizes.len() * c];
        let mut r = 0;
        for (g, &size) in sizes.iter().enumerate() {
            for _ in 0..size {
                for j in 0..c {
                    out[g * c + j] += input.values()[r * c + j];
                }
                r += 1;
            }
        }
        let value = Tensor::matrix(sizes.len(), c, out)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::GroupSum(x.0, sizes.to_vec()), rg))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let value = self.value(x).slice_rows(start, end)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::SliceRows(x.0, start), rg))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let value = self.value(x).slice_cols(start, end)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::SliceCols(x.0, start), rg))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).concat_cols(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::ConcatCols(a.0, b.0), rg))
    }

    /// `[n, c] -> [n, 1]`.
    pub fn row_sum(&mut self, x: Var) -> Var {
        let input = self.value(x);
        let c = input.cols().max(1);
        let sums = input.values().chunks(c).map(|r| r.iter().sum()).collect();
        let rg = self.rg(x);
        self.push(Tensor::column(sums), Op::RowSum(x.0), rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        let rg = self.rg(x);
        self.push(value, Op::Sum(x.0), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let value = Tensor::scalar(t.sum() / t.len().max(1) as f64);
        let rg = self.rg(x);
        self.push(value, Op::Mean(x.0), rg)
    }

    /// Weighted sum `sum_i w_i x_i` with constant weights.
    pub fn dot(&mut self, x: Var, weights: Vec<f64>) -> Result<Var> {
        let t = self.value(x);
        if t.len() != weights.len() {
            return Err(Error::dim(format!(
                "dot of {} values with {} weights",
                t.len(),
                weights.len()
            )));
        }
        let s = t.values().iter().zip(&weights).map(|(a, b)| a * b).sum();
        let rg = self.rg(x);
        Ok(self.push(Tensor::scalar(s), Op::Dot(x.0, weights), rg))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = &self.nodes[loss.0];
        if !root.value.is_scalar() {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        let n = loss.0 + 1;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..n).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }

        let shapes = self.nodes[..n].iter().map(|nd| nd.value.shape().to_vec()).collect();
        for (i, nd) in self.nodes[..n].iter().enumerate() {
            if !(matches!(nd.op, Op::Leaf) && nd.requires_grad) {
                grads[i] = None;
            }
        }
        Ok(Gradients { grads, shapes })
    }

    fn wants(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], i: usize, delta: impl Iterator<Item = f64>) {
        match &mut grads[i] {
            Some(acc) => acc.iter_mut().zip(delta).for_each(|(a, d)| *a += d),
            slot @ None => *slot = Some(delta.collect()),
        }
    }

    fn slot<'a>(&self, grads: &'a mut [Option<Vec<f64>>], i: usize) -> &'a mut Vec<f64> {
        grads[i].get_or_insert_with(|| vec![0.0; self.nodes[i].value.len()])
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |i: usize| self.nodes[i].value.values();
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                let (m, k) = (self.nodes[a].value.rows(), self.nodes[a].value.cols());
                let n = self.nodes[b].value.cols();
                if self.wants(a) {
                    let da = self.slot(grads, a);
                    gemm(m, n, k, g, false, val(b), true, da, true);
                }
                if self.wants(b) {
                    let db = self.slot(grads, b);
                    gemm(k, m, n, val(a), true, g, false, db, true);
                }
            }
            &Op::AddRow(x, bias) => {
                if self.wants(x) {
                    self.accumulate(grads, x, g.iter().copied());
                }
                if self.wants(bias) {
                    let c = self.nodes[bias].value.cols().max(1);
                    let db = self.slot(grads, bias);
                    for row in g.chunks(c) {
                        db.iter_mut().zip(row).for_each(|(d, r)| *d += r);
                    }
                }
            }
            &Op::Add(a, b) => {
                if self.wants(a) {
                    self.accumulate(grads, a, g.iter().copied());
                }
                if self.wants(b) {
                    self.accumulate(grads, b, g.iter().copied());
                }
            }
            &Op::Sub(a, b) => {
                if self.wants(a) {
                    self.accumulate(grads, a, g.iter().copied());
                }
                if self.wants(b) {
                    self.accumulate(grads, b, g.iter().map(|v| -v));
                }
            }
            &Op::Mul(a, b) => {
                if self.wants(a) {
                    self.accumulate(grads, a, g.iter().zip(val(b)).map(|(g, y)| g * y));
                }
                if self.wants(b) {
                    self.accumulate(grads, b, g.iter().zip(val(a)).map(|(g, x)| g * x));
                }
            }
            &Op::Min(a, b) => {
                let (va, vb) = (val(a), val(b));
                if self.wants(a) {
                    let d = g.iter().enumerate().map(|(i, g)| if va[i] <= vb[i] { *g } else { 0.0 });
                    self.accumulate(grads, a, d);
                }
                if self.wants(b) {
                    let d = g.iter().enumerate().map(|(i, g)| if va[i] <= vb[i] { 0.0 } else { *g });
                    self.accumulate(grads, b, d);
                }
            }
            &Op::Scale(x, k) => self.accumulate(grads, x, g.iter().map(|v| v * k)),
            &Op::AddScalar(x) => self.accumulate(grads, x, g.iter().copied()),
            &Op::LeakyRelu(x, slope) => {
                let d = g.iter().zip(val(x)).map(|(g, &v)| if v > 0.0 { *g } else { g * slope });
                self.accumulate(grads, x, d);
            }
            &Op::Tanh(x) => {
                let y = node.value.values();
                self.accumulate(grads, x, g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)));
            }
            &Op::Exp(x) => {
                let y = node.value.values();
                self.accumulate(grads, x, g.iter().zip(y).map(|(g, y)| g * y));
            }
            &Op::Ln(x) => self.accumulate(grads, x, g.iter().zip(val(x)).map(|(g, v)| g / v)),
            &Op::Square(x) => {
                self.accumulate(grads, x, g.iter().zip(val(x)).map(|(g, v)| 2.0 * g * v))
            }
            &Op::Clamp(x, lo, hi) => {
                let d = g
                    .iter()
                    .zip(val(x))
                    .map(|(g, &v)| if v < lo || v > hi { 0.0 } else { *g });
                self.accumulate(grads, x, d);
            }
            &Op::LogSigmoid(x, floor) => {
                let lf = floor.ln();
                let d = g.iter().zip(val(x)).map(|(g, &v)| {
                    if log_sigmoid(v) < lf {
                        0.0
                    } else {
                        g * sigmoid(-v)
                    }
                });
                self.accumulate(grads, x, d);
            }
            Op::GroupSum(x, sizes) => {
                let x = *x;
                let c = self.nodes[x].value.cols().max(1);
                let dx = self.slot(grads, x);
                let mut r = 0;
                for (grp, &size) in sizes.iter().enumerate() {
                    for _ in 0..size {
                        for j in 0..c {
                            dx[r * c + j] += g[grp * c + j];
                        }
                        r += 1;
                    }
                }
            }
            &Op::SliceRows(x, start) => {
                let c = self.nodes[x].value.cols().max(1);
                let dx = self.slot(grads, x);
                dx[start * c..start * c + g.len()]
                    .iter_mut()
                    .zip(g)
                    .for_each(|(d, g)| *d += g);
            }
            &Op::SliceCols(x, start) => {
                let c = self.nodes[x].value.cols();
                let w = node.value.cols().max(1);
                let dx = self.slot(grads, x);
                for (r, row) in g.chunks(w).enumerate() {
                    dx[r * c + start..r * c + start + w]
                        .iter_mut()
                        .zip(row)
                        .for_each(|(d, g)| *d += g);
                }
            }
            &Op::ConcatCols(a, b) => {
                let ca = self.nodes[a].value.cols();
                let cb = self.nodes[b].value.cols();
                let w = ca + cb;
                if self.wants(a) {
                    let da = self.slot(grads, a);
                    for (r, row) in g.chunks(w.max(1)).enumerate() {
                        da[r * ca..(r + 1) * ca].iter_mut().zip(&row[..ca]).for_each(|(d, g)| *d += g);
                    }
                }
                if self.wants(b) {
                    let db = self.slot(grads, b);
                    for (r, row) in g.chunks(w.max(1)).enumerate() {
                        db[r * cb..(r + 1) * cb].iter_mut().zip(&row[ca..]).for_each(|(d, g)| *d += g);
                    }
                }
            }
            &Op::RowSum(x) => {
                let c = self.nodes[x].value.cols().max(1);
                let dx = self.slot(grads, x);
                for (r, row) in dx.chunks_mut(c).enumerate() {
                    row.iter_mut().for_each(|d| *d += g[r]);
                }
            }
            &Op::Sum(x) => {
                let n = self.nodes[x].value.len();
                self.accumulate(grads, x, std::iter::repeat_n(g[0], n));
            }
            &Op::Mean(x) => {
                let n = self.nodes[x].value.len();
                let d = g[0] / n.max(1) as f64;
                self.accumulate(grads, x, std::iter::repeat_n(d, n));
            }
            Op::Dot(x, w) => self.accumulate(grads, *x, w.iter().map(|w| w * g[0])),
        }
    }
}
