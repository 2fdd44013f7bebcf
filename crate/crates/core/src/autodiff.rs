//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Graph`] is an append-only arena of nodes. Every operation pushes one
//! node holding its value, a same-shape gradient slot and the ids of its
//! inputs. Because inputs always precede outputs in the arena, walking it
//! backwards from the loss visits nodes in reverse topological order, each
//! exactly once. Gradients reaching a node along several paths add up.
//!
//! Parameter leaves do not copy their values out of the [`ParamStore`]; the
//! graph borrows the store for its lifetime. After [`Graph::backward`],
//! [`Graph::into_grads`] releases the borrow and hands back the parameter
//! gradients so they can be accumulated into the store.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::rng::RngStream;
use crate::tensor::{matmul_at_acc, matmul_bt_acc, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    /// `x [m×n] + b [m×1]`, `b` broadcast across the columns of `x`.
    AddBias(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    ConcatRows(Var, Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    MeanCols(Var),
    Transpose(Var),
    /// Column `j` multiplied by a constant weight `w[j]`.
    ScaleCols(Var, Vec<f64>),
    /// Elementwise product with a constant mask.
    MulConst(Var, Vec<f64>),
    MaskedSoftmax(Var),
    SoftmaxCols(Var),
    /// Sum over columns of `-log softmax(x[:, k])[label_k]`.
    CrossEntropy(Var, Vec<usize>),
    SumSquares(Var),
    Sum(Var),
    /// Rows `ids` of a `V × d` table, returned as a `d × T` matrix.
    Embed(ParamId, Vec<usize>),
}

#[derive(Debug)]
struct Node {
    /// `None` for parameter leaves, whose value lives in the store.
    value: Option<Tensor>,
    grad: Tensor,
    op: Op,
    requires_grad: bool,
}

#[cfg(test)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Fault {
    /// Relu backward scaled by 1.5.
    ReluScale,
    /// Sigmoid backward uses y instead of y(1-y).
    SigmoidDerivative,
}

/// Gradients produced by one backward pass, detached from the graph.
#[derive(Clone, Debug, Default)]
pub struct Grads {
    dense: Vec<(ParamId, Tensor)>,
    /// `(table, row, gradient row)` from embedding lookups.
    rows: Vec<(ParamId, usize, Vec<f64>)>,
}

impl Grads {
    /// Adds `scale ·` every gradient into the store's gradient slots.
    pub fn accumulate(&self, store: &mut ParamStore, scale: f64) -> Result<()> {
        for (id, g) in &self.dense {
            if scale == 1.0 {
                store.accumulate_grad(*id, g)?;
            } else {
                store.accumulate_grad(*id, &g.scaled(scale))?;
            }
        }
        for (id, row, g) in &self.rows {
            let e = store.entry_mut(*id);
            if !e.trainable() {
                continue;
            }
            let d = e.grad.cols();
            let dst = &mut e.grad.data_mut()[row * d..(row + 1) * d];
            for (a, b) in dst.iter_mut().zip(g) {
                *a += scale * b;
            }
        }
        Ok(())
    }

    /// Dense gradient for `id`, summing all contributions.
    pub fn get(&self, store: &ParamStore, id: ParamId) -> Tensor {
        let (r, c) = store.value(id).shape();
        let mut out = Tensor::zeros(r, c);
        for (pid, g) in &self.dense {
            if *pid == id {
                out.add_assign(g);
            }
        }
        for (pid, row, g) in &self.rows {
            if *pid == id {
                for (j, v) in g.iter().enumerate() {
                    let cur = out.get(*row, j);
                    out.set(*row, j, cur + v);
                }
            }
        }
        out
    }
}

pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    #[cfg(test)]
    pub(crate) fault: Option<Fault>,
}

static EMPTY_STORE: ParamStore = ParamStore::new();

impl Graph<'static> {
    /// A graph with no parameters; everything is a constant.
    pub fn detached() -> Self {
        Graph::new(&EMPTY_STORE)
    }
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            #[cfg(test)]
            fault: None,
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.value(*id),
            _ => unreachable!("non-parameter node without value"),
        }
    }

    pub fn grad(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].grad
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        let (r, c) = value.shape();
        self.nodes.push(Node {
            value: Some(value),
            grad: Tensor::zeros(r, c),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Leaf bound to a store entry. Frozen entries behave like constants.
    pub fn param(&mut self, id: ParamId) -> Var {
        let e = self.params.entry(id);
        let (r, c) = e.value.shape();
        self.nodes.push(Node {
            value: None,
            grad: Tensor::zeros(r, c),
            op: Op::Param(id),
            requires_grad: e.trainable(),
        });
        Var(self.nodes.len() - 1)
    }

    /// Gathers rows `ids` of the `V × d` table `table` into a `d × T` matrix.
    /// Row 0 is the padding row and never receives a gradient.
    pub fn embed(&mut self, table: ParamId, ids: &[usize]) -> Result<Var> {
        let e = self.params.entry(table);
        let (v, d) = e.value.shape();
        let mut out = Tensor::zeros(d, ids.len());
        for (t, &id) in ids.iter().enumerate() {
            if id >= v {
                return Err(Error::Shape {
                    op: "embed",
                    lhs: (v, d),
                    rhs: (id, 1),
                });
            }
            for j in 0..d {
                out.set(j, t, e.value.get(id, j));
            }
        }
        let rg = e.trainable();
        Ok(self.push(out, Op::Embed(table, ids.to_vec()), rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::Shape {
                op,
                lhs: sa,
                rhs: sb,
            });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    /// `x + b` where `b` is a column vector with as many rows as `x`; `b` is
    /// added to every column of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xs, bs) = (self.shape(x), self.shape(b));
        if bs != (xs.0, 1) {
            return Err(Error::Shape {
                op: "add_bias",
                lhs: xs,
                rhs: bs,
            });
        }
        let mut out = self.value(x).clone();
        let bias = self.value(b).data();
        let cols = xs.1;
        for (i, row) in out.data_mut().chunks_mut(cols.max(1)).enumerate() {
            row.iter_mut().for_each(|v| *v += bias[i]);
        }
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(out, Op::AddBias(x, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let (r, c) = self.shape(a);
        let out = Tensor::from_vec(r, c, data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let out = self.value(a).scaled(k);
        let rg = self.rg(a);
        self.push(out, Op::Scale(a, k), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(libm::tanh);
        let rg = self.rg(a);
        self.push(out, Op::Tanh(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let rg = self.rg(a);
        self.push(out, Op::Sigmoid(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        let rg = self.rg(a);
        self.push(out, Op::Relu(a), rg)
    }

    /// Stacks `a` on top of `b`.
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.1 {
            return Err(Error::Shape {
                op: "concat_rows",
                lhs: sa,
                rhs: sb,
            });
        }
        let mut data = Vec::with_capacity((sa.0 + sb.0) * sa.1);
        data.extend_from_slice(self.value(a).data());
        data.extend_from_slice(self.value(b).data());
        let out = Tensor::from_vec(sa.0 + sb.0, sa.1, data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::ConcatRows(a, b), rg))
    }

    /// Places the inputs side by side; all must have the same row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Degenerate {
                op: "concat_cols",
                reason: "no inputs".into(),
            });
        };
        let rows = self.shape(first).0;
        let mut cols = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.0 != rows {
                return Err(Error::Shape {
                    op: "concat_cols",
                    lhs: self.shape(first),
                    rhs: s,
                });
            }
            cols += s.1;
        }
        let mut out = Tensor::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let v = self.value(p);
            for r in 0..rows {
                for c in 0..v.cols() {
                    out.set(r, offset + c, v.get(r, c));
                }
            }
            offset += v.cols();
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Columns `start..start + len`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if len == 0 || start + len > c {
            return Err(Error::Shape {
                op: "slice_cols",
                lhs: (r, c),
                rhs: (start, start + len),
            });
        }
        let v = self.value(a);
        let mut out = Tensor::zeros(r, len);
        for i in 0..r {
            for j in 0..len {
                out.set(i, j, v.get(i, start + j));
            }
        }
        let rg = self.rg(a);
        Ok(self.push(out, Op::SliceCols(a, start), rg))
    }

    /// Arithmetic mean of the columns, as a column vector.
    pub fn mean_cols(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.shape(a);
        if c == 0 {
            return Err(Error::Degenerate {
                op: "mean_cols",
                reason: "zero columns".into(),
            });
        }
        let v = self.value(a);
        let data = (0..r)
            .map(|i| (0..c).map(|j| v.get(i, j)).sum::<f64>() / c as f64)
            .collect();
        let out = Tensor::from_vec(r, 1, data)?;
        let rg = self.rg(a);
        Ok(self.push(out, Op::MeanCols(a), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        let rg = self.rg(a);
        self.push(out, Op::Transpose(a), rg)
    }

    /// Multiplies column `j` by the constant `weights[j]`.
    pub fn scale_cols(&mut self, a: Var, weights: &[f64]) -> Result<Var> {
        let (r, c) = self.shape(a);
        if weights.len() != c {
            return Err(Error::Shape {
                op: "scale_cols",
                lhs: (r, c),
                rhs: (1, weights.len()),
            });
        }
        let mut out = self.value(a).clone();
        for i in 0..r {
            for (j, w) in weights.iter().enumerate() {
                let x = out.get(i, j);
                out.set(i, j, x * w);
            }
        }
        let rg = self.rg(a);
        Ok(self.push(out, Op::ScaleCols(a, weights.to_vec()), rg))
    }

    /// Elementwise product with a constant array of the same shape.
    pub fn mul_const(&mut self, a: Var, mask: &[f64]) -> Result<Var> {
        let (r, c) = self.shape(a);
        if mask.len() != r * c {
            return Err(Error::Shape {
                op: "mul_const",
                lhs: (r, c),
                rhs: (mask.len(), 1),
            });
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(mask)
            .map(|(x, m)| x * m)
            .collect();
        let out = Tensor::from_vec(r, c, data)?;
        let rg = self.rg(a);
        Ok(self.push(out, Op::MulConst(a, mask.to_vec()), rg))
    }

    /// Inverted dropout. In training mode every entry is zeroed with
    /// probability `rate` and survivors are scaled by `1 / (1 - rate)`;
    /// otherwise (or when `rate == 0`) this is the identity and no node is
    /// added.
    pub fn dropout(
        &mut self,
        a: Var,
        rate: f64,
        training: bool,
        rng: &mut RngStream,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - rate);
        let n = self.value(a).len();
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.bernoulli(rate) { 0.0 } else { keep })
            .collect();
        self.mul_const(a, &mask)
    }

    /// Softmax over the entries of a `1 × n` row restricted to positions where
    /// `mask` is true. Masked positions get exactly zero weight. Scores are
    /// shifted by their maximum before exponentiation.
    pub fn masked_softmax(&mut self, scores: Var, mask: &[bool]) -> Result<Var> {
        let (r, c) = self.shape(scores);
        if r != 1 || mask.len() != c {
            return Err(Error::Shape {
                op: "masked_softmax",
                lhs: (r, c),
                rhs: (1, mask.len()),
            });
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::Degenerate {
                op: "masked_softmax",
                reason: "every position is masked".into(),
            });
        }
        let out = Tensor::row(&softmax_masked(self.value(scores).data(), mask));
        let rg = self.rg(scores);
        Ok(self.push(out, Op::MaskedSoftmax(scores), rg))
    }

    /// Plain softmax over a `1 × n` row.
    pub fn softmax(&mut self, scores: Var) -> Result<Var> {
        let n = self.shape(scores).1;
        self.masked_softmax(scores, &vec![true; n])
    }

    /// Softmax applied to every column independently.
    pub fn softmax_cols(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let (r, c) = v.shape();
        let mut out = Tensor::zeros(r, c);
        let all = vec![true; r];
        for j in 0..c {
            let p = softmax_masked(&v.col_vec(j), &all);
            for (i, x) in p.into_iter().enumerate() {
                out.set(i, j, x);
            }
        }
        let rg = self.rg(a);
        self.push(out, Op::SoftmaxCols(a), rg)
    }

    /// Negative log-likelihood of `labels[k]` under `softmax(logits[:, k])`,
    /// summed over columns. Returns a `1 × 1` node.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let v = self.value(logits);
        let (r, c) = v.shape();
        if labels.len() != c {
            return Err(Error::Shape {
                op: "cross_entropy",
                lhs: (r, c),
                rhs: (1, labels.len()),
            });
        }
        let mut total = 0.0;
        for (k, &y) in labels.iter().enumerate() {
            if y >= r {
                return Err(Error::Data(format!(
                    "gold label {y} outside 0..{r} for column {k}"
                )));
            }
            let col = v.col_vec(k);
            total += log_sum_exp(&col) - col[y];
        }
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(total),
            Op::CrossEntropy(logits, labels.to_vec()),
            rg,
        ))
    }

    /// Squared Frobenius norm as a `1 × 1` node.
    pub fn sum_squares(&mut self, a: Var) -> Var {
        let s = self.value(a).sum_squares();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::SumSquares(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    /// Clears every gradient slot.
    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad.fill(0.0);
        }
    }

    /// Back-propagates from a `1 × 1` root seeded with 1.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        let s = self.shape(root);
        if s != (1, 1) {
            return Err(Error::Shape {
                op: "backward",
                lhs: s,
                rhs: (1, 1),
            });
        }
        self.nodes[root.0].grad.data_mut()[0] += 1.0;
        for i in (0..=root.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let g = core::mem::replace(&mut self.nodes[i].grad, Tensor::zeros(0, 0));
            if g.data().iter().any(|&x| x != 0.0) {
                self.propagate(i, &g);
            }
            self.nodes[i].grad = g;
        }
        Ok(())
    }

    fn acc(&mut self, v: Var, f: impl FnOnce(&mut Tensor)) {
        if self.nodes[v.0].requires_grad {
            f(&mut self.nodes[v.0].grad);
        }
    }

    fn propagate(&mut self, i: usize, g: &Tensor) {
        let op = self.nodes[i].op.clone();
        match op {
            Op::Constant | Op::Param(_) | Op::Embed(..) => {}
            Op::MatMul(a, b) => {
                if self.rg(a) {
                    let bv = self.value(b).clone();
                    self.acc(a, |ga| matmul_bt_acc(g, &bv, ga));
                }
                if self.rg(b) {
                    let av = self.value(a).clone();
                    self.acc(b, |gb| matmul_at_acc(&av, g, gb));
                }
            }
            Op::Add(a, b) => {
                self.acc(a, |ga| ga.add_assign(g));
                self.acc(b, |gb| gb.add_assign(g));
            }
            Op::AddBias(x, b) => {
                self.acc(x, |gx| gx.add_assign(g));
                let cols = g.cols();
                self.acc(b, |gb| {
                    for (r, dst) in gb.data_mut().iter_mut().enumerate() {
                        *dst += g.data()[r * cols..(r + 1) * cols].iter().sum::<f64>();
                    }
                });
            }
            Op::Mul(a, b) => {
                let av = self.value(a).clone();
                let bv = self.value(b).clone();
                self.acc(a, |ga| zip3(ga, g, &bv, |d, g, y| *d += g * y));
                self.acc(b, |gb| zip3(gb, g, &av, |d, g, x| *d += g * x));
            }
            Op::Scale(a, k) => self.acc(a, |ga| zip2(ga, g, |d, g| *d += k * g)),
            Op::Tanh(a) => {
                let y = self.nodes[i].value.clone().unwrap();
                self.acc(a, |ga| zip3(ga, g, &y, |d, g, y| *d += g * (1.0 - y * y)));
            }
            Op::Sigmoid(a) => {
                let y = self.nodes[i].value.clone().unwrap();
                #[cfg(test)]
                if self.fault == Some(Fault::SigmoidDerivative) {
                    self.acc(a, |ga| zip3(ga, g, &y, |d, g, y| *d += g * y));
                    return;
                }
                self.acc(a, |ga| zip3(ga, g, &y, |d, g, y| *d += g * y * (1.0 - y)));
            }
            Op::Relu(a) => {
                let x = self.value(a).clone();
                #[allow(unused_mut)]
                let mut k = 1.0;
                #[cfg(test)]
                if self.fault == Some(Fault::ReluScale) {
                    k = 1.5;
                }
                self.acc(a, |ga| {
                    zip3(ga, g, &x, |d, g, x| {
                        if x > 0.0 {
                            *d += k * g
                        }
                    })
                });
            }
            Op::ConcatRows(a, b) => {
                let na = self.value(a).len();
                self.acc(a, |ga| {
                    for (d, s) in ga.data_mut().iter_mut().zip(&g.data()[..na]) {
                        *d += s;
                    }
                });
                self.acc(b, |gb| {
                    for (d, s) in gb.data_mut().iter_mut().zip(&g.data()[na..]) {
                        *d += s;
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let (r, c) = self.shape(p);
                    self.acc(p, |gp| {
                        for i in 0..r {
                            for j in 0..c {
                                let cur = gp.get(i, j);
                                gp.set(i, j, cur + g.get(i, offset + j));
                            }
                        }
                    });
                    offset += c;
                }
            }
            Op::SliceCols(a, start) => {
                let (r, len) = g.shape();
                self.acc(a, |ga| {
                    for i in 0..r {
                        for j in 0..len {
                            let cur = ga.get(i, start + j);
                            ga.set(i, start + j, cur + g.get(i, j));
                        }
                    }
                });
            }
            Op::MeanCols(a) => {
                let (r, c) = self.shape(a);
                self.acc(a, |ga| {
                    for i in 0..r {
                        let share = g.get(i, 0) / c as f64;
                        for j in 0..c {
                            let cur = ga.get(i, j);
                            ga.set(i, j, cur + share);
                        }
                    }
                });
            }
            Op::Transpose(a) => {
                let gt = g.transpose();
                self.acc(a, |ga| ga.add_assign(&gt));
            }
            Op::ScaleCols(a, w) => {
                let (r, c) = g.shape();
                self.acc(a, |ga| {
                    for i in 0..r {
                        for j in 0..c {
                            let cur = ga.get(i, j);
                            ga.set(i, j, cur + w[j] * g.get(i, j));
                        }
                    }
                });
            }
            Op::MulConst(a, m) => {
                self.acc(a, |ga| {
                    for ((d, g), m) in ga.data_mut().iter_mut().zip(g.data()).zip(&m) {
                        *d += g * m;
                    }
                });
            }
            Op::MaskedSoftmax(a) => {
                let y = self.nodes[i].value.clone().unwrap();
                let dot: f64 = g.data().iter().zip(y.data()).map(|(g, y)| g * y).sum();
                self.acc(a, |ga| zip3(ga, g, &y, |d, g, y| *d += y * (g - dot)));
            }
            Op::SoftmaxCols(a) => {
                let y = self.nodes[i].value.clone().unwrap();
                let (r, c) = y.shape();
                self.acc(a, |ga| {
                    for j in 0..c {
                        let dot: f64 = (0..r).map(|k| g.get(k, j) * y.get(k, j)).sum();
                        for k in 0..r {
                            let cur = ga.get(k, j);
                            ga.set(k, j, cur + y.get(k, j) * (g.get(k, j) - dot));
                        }
                    }
                });
            }
            Op::CrossEntropy(a, labels) => {
                let seed = g.item();
                let v = self.value(a).clone();
                let (r, _) = v.shape();
                let all = vec![true; r];
                self.acc(a, |ga| {
                    for (j, &y) in labels.iter().enumerate() {
                        let p = softmax_masked(&v.col_vec(j), &all);
                        for (k, pk) in p.into_iter().enumerate() {
                            let target = if k == y { 1.0 } else { 0.0 };
                            let cur = ga.get(k, j);
                            ga.set(k, j, cur + seed * (pk - target));
                        }
                    }
                });
            }
            Op::SumSquares(a) => {
                let seed = g.item();
                let x = self.value(a).clone();
                self.acc(a, |ga| zip2(ga, &x, |d, x| *d += 2.0 * seed * x));
            }
            Op::Sum(a) => {
                let seed = g.item();
                self.acc(a, |ga| ga.data_mut().iter_mut().for_each(|d| *d += seed));
            }
        }
    }

    /// Consumes the graph and returns the gradients of every trainable
    /// parameter leaf and embedding lookup.
    pub fn into_grads(self) -> Grads {
        let mut grads = Grads::default();
        for n in self.nodes {
            if !n.requires_grad {
                continue;
            }
            match n.op {
                Op::Param(id) => grads.dense.push((id, n.grad)),
                Op::Embed(id, ids) => {
                    for (t, &row) in ids.iter().enumerate() {
                        if row == 0 {
                            continue;
                        }
                        grads.rows.push((id, row, n.grad.col_vec(t)));
                    }
                }
                _ => {}
            }
        }
        grads
    }

    /// Hash of the sign pattern of every relu input. Two forward passes with
    /// equal signatures are on the same linear piece of every rectifier.
    pub fn kink_signature(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for n in &self.nodes {
            if let Op::Relu(a) = n.op {
                for &x in self.value(a).data() {
                    h ^= (x > 0.0) as u64 + 1;
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }
}

fn zip2(dst: &mut Tensor, a: &Tensor, f: impl Fn(&mut f64, f64)) {
    for (d, &x) in dst.data_mut().iter_mut().zip(a.data()) {
        f(d, x);
    }
}

fn zip3(dst: &mut Tensor, a: &Tensor, b: &Tensor, f: impl Fn(&mut f64, f64, f64)) {
    for ((d, &x), &y) in dst.data_mut().iter_mut().zip(a.data()).zip(b.data()) {
        f(d, x, y);
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + libm::log(xs.iter().map(|x| libm::exp(x - m)).sum::<f64>())
}

/// Max-shifted softmax over the positions where `mask` is true.
pub(crate) fn softmax_masked(xs: &[f64], mask: &[bool]) -> Vec<f64> {
    let m = xs
        .iter()
        .zip(mask)
        .filter(|(_, &k)| k)
        .map(|(x, _)| *x)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = xs
        .iter()
        .zip(mask)
        .map(|(x, &k)| if k { libm::exp(x - m) } else { 0.0 })
        .collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= z);
    out
}
