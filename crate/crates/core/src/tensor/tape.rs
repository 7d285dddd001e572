//! Reverse-mode differentiation over rank-2 tensors.
//!
//! A [`Tape`] records every forward operation as a node holding its value and
//! the handles of its inputs. [`Tape::backward`] walks the nodes in reverse
//! insertion order, which is a topological order by construction, and
//! accumulates vector-Jacobian products into each input.
//!
//! ```
//! use ldgcn::tensor::{Tape, Tensor};
//!
//! let tape = Tape::new();
//! let w = tape.leaf(Tensor::from_rows(&[[1.0, 2.0]]));
//! let x = tape.constant(Tensor::from_rows(&[[3.0], [4.0]]));
//! let y = tape.matmul(w, x).unwrap();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.get(w).unwrap(), &Tensor::from_rows(&[[3.0, 4.0]]));
//! ```

use std::cell::{Ref, RefCell};
use std::sync::Arc;

use super::params::{ParamId, ParamStore};
use super::Tensor;
use crate::adjacency::{MulAddCounter, SparseAdjacency};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Pointwise nonlinearity used by convolution layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            _ => Err(Error::config(format!("unknown activation `{s}`"))),
        }
    }
}

/// Vector-Jacobian product for a user-defined op: receives the output
/// gradient, the input values and the output value, returns one gradient per
/// input.
pub type BackwardFn = Box<dyn Fn(&Tensor, &[&Tensor], &Tensor) -> Vec<Tensor>>;

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    ScaleBy(Var, Var),
    Concat(Vec<Var>),
    Slice(Var, usize, usize),
    Transpose(Var),
    Sigmoid(Var),
    Relu(Var),
    Tanh(Var),
    SoftmaxRows(Var),
    Spmm(Arc<SparseAdjacency>, Var),
    Sum(Var),
    MeanRows(Var),
    Gather(Var, Vec<usize>),
    CrossEntropy(Var, Vec<usize>),
    Custom(Vec<Var>, BackwardFn),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Recording of a forward computation. One tape per thread.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    params: RefCell<Vec<(ParamId, Var)>>,
    counter: MulAddCounter,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multiply-add tallies of the forward ops recorded so far.
    pub fn counter(&self) -> &MulAddCounter {
        &self.counter
    }

    fn push(&self, value: Tensor, op: Op) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var(nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[v.0].value)
    }

    /// Differentiable input with no parameter identity.
    pub fn leaf(&self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Alias of [`leaf`](Self::leaf) for values whose gradient is unused.
    pub fn constant(&self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Binds a stored parameter. Repeated binds of the same id return the
    /// same node, so reused weights accumulate gradient in one place.
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&(_, v)) = self.params.borrow().iter().find(|(p, _)| *p == id) {
            return v;
        }
        let v = self.push(store.get(id).clone(), Op::Leaf);
        self.params.borrow_mut().push((id, v));
        v
    }

    /// Makes `var` the node later [`Tape::param`] calls return for `id`.
    /// Lets a gradient check drive stored parameters through its own leaves.
    pub fn bind_param(&self, id: ParamId, var: Var) -> Result<()> {
        let mut params = self.params.borrow_mut();
        if params.iter().any(|(p, _)| *p == id) {
            return Err(Error::Usage(format!(
                "parameter {id:?} already bound on this tape"
            )));
        }
        params.push((id, var));
        Ok(())
    }

    /// Parameters bound on this tape, in binding order.
    pub fn bound_params(&self) -> Vec<ParamId> {
        self.params.borrow().iter().map(|&(p, _)| p).collect()
    }

    fn unary(&self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.value(x).map(f);
        self.push(value, op)
    }

    fn elementwise(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let value = self.value(a).zip_map(&self.value(b), f)?;
        Ok(self.push(value, op))
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let (av, bv) = (self.value(a), self.value(b));
            let out = av.matmul(&bv)?;
            self.counter
                .add_dense((av.rows() * av.cols() * bv.cols()) as u64);
            out
        };
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// `x + 1·bias` with a `1×c` bias broadcast over rows.
    pub fn add_row(&self, x: Var, bias: Var) -> Result<Var> {
        let value = {
            let (xv, bv) = (self.value(x), self.value(bias));
            if bv.rows() != 1 || bv.cols() != xv.cols() {
                return Err(Error::shape(format!(
                    "bias {:?} for input {:?}",
                    bv.shape(),
                    xv.shape()
                )));
            }
            let mut out = xv.clone();
            let c = xv.cols();
            for (i, v) in out.data_mut().iter_mut().enumerate() {
                *v += bv.data()[i % c];
            }
            out
        };
        Ok(self.push(value, Op::AddRow(x, bias)))
    }

    pub fn scale(&self, x: Var, s: f64) -> Var {
        self.unary(x, |v| v * s, Op::Scale(x, s))
    }

    pub fn add_scalar(&self, x: Var, c: f64) -> Var {
        self.unary(x, |v| v + c, Op::AddScalar(x))
    }

    /// `s·x` with a differentiable `1×1` factor `s`.
    pub fn scale_by(&self, x: Var, s: Var) -> Result<Var> {
        let value = {
            let sv = self.value(s);
            if sv.len() != 1 {
                return Err(Error::shape(format!("scale_by factor {:?}", sv.shape())));
            }
            let k = sv.item();
            self.value(x).map(|v| v * k)
        };
        Ok(self.push(value, Op::ScaleBy(x, s)))
    }

    pub fn concat_cols(&self, parts: &[Var]) -> Result<Var> {
        let value = {
            let vals: Vec<_> = parts.iter().map(|&p| self.value(p)).collect();
            let refs: Vec<&Tensor> = vals.iter().map(|r| &**r).collect();
            Tensor::concat_cols(&refs)?
        };
        Ok(self.push(value, Op::Concat(parts.to_vec())))
    }

    pub fn slice_cols(&self, x: Var, start: usize, end: usize) -> Result<Var> {
        let value = self.value(x).slice_cols(start, end)?;
        Ok(self.push(value, Op::Slice(x, start, end)))
    }

    pub fn transpose(&self, x: Var) -> Var {
        let value = self.value(x).transpose();
        self.push(value, Op::Transpose(x))
    }

    pub fn sigmoid(&self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn relu(&self, x: Var) -> Var {
        self.unary(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn tanh(&self, x: Var) -> Var {
        self.unary(x, f64::tanh, Op::Tanh(x))
    }

    pub fn activate(&self, x: Var, act: Activation) -> Var {
        match act {
            Activation::Relu => self.relu(x),
            Activation::Tanh => self.tanh(x),
            Activation::Identity => x,
        }
    }

    pub fn softmax_rows(&self, x: Var) -> Var {
        let value = {
            let xv = self.value(x);
            let mut out = xv.clone();
            let c = xv.cols();
            for row in out.data_mut().chunks_mut(c) {
                softmax_in_place(row);
            }
            out
        };
        self.push(value, Op::SoftmaxRows(x))
    }

    /// `A·x` through a sparse adjacency; adds `m·d` to the sparse counter.
    pub fn spmm(&self, adj: &Arc<SparseAdjacency>, x: Var) -> Result<Var> {
        let value = {
            let xv = self.value(x);
            let out = adj.spmm(&xv)?;
            self.counter.add_sparse((adj.nnz() * xv.cols()) as u64);
            out
        };
        Ok(self.push(value, Op::Spmm(Arc::clone(adj), x)))
    }

    /// `A^k·x` by `k` successive sparse products.
    pub fn kth_order(&self, adj: &Arc<SparseAdjacency>, x: Var, k: usize) -> Result<Var> {
        if k == 0 {
            return Err(Error::Usage("order k must be >= 1".into()));
        }
        let mut cur = x;
        for _ in 0..k {
            cur = self.spmm(adj, cur)?;
        }
        Ok(cur)
    }

    pub fn sum(&self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        self.push(value, Op::Sum(x))
    }

    /// Column means, `1×c`.
    pub fn mean_rows(&self, x: Var) -> Var {
        let value = {
            let xv = self.value(x);
            let (r, c) = (xv.rows(), xv.cols());
            let mut out = Tensor::zeros(1, c);
            for i in 0..r {
                for (o, v) in out.data_mut().iter_mut().zip(xv.row(i)) {
                    *o += v;
                }
            }
            out.map(|v| v / r as f64)
        };
        self.push(value, Op::MeanRows(x))
    }

    /// Row lookup: output row `i` is row `indices[i]` of `table`.
    pub fn gather_rows(&self, table: Var, indices: &[usize]) -> Result<Var> {
        let value = {
            let tv = self.value(table);
            if indices.is_empty() {
                return Err(Error::shape("gather of zero rows"));
            }
            if let Some(&bad) = indices.iter().find(|&&i| i >= tv.rows()) {
                return Err(Error::Vocab(format!(
                    "index {bad} out of range for {} rows",
                    tv.rows()
                )));
            }
            let mut data = Vec::with_capacity(indices.len() * tv.cols());
            for &i in indices {
                data.extend_from_slice(tv.row(i));
            }
            Tensor::from_vec(indices.len(), tv.cols(), data)?
        };
        Ok(self.push(value, Op::Gather(table, indices.to_vec())))
    }

    /// Summed softmax cross-entropy of each logit row against its target.
    pub fn cross_entropy(&self, logits: Var, targets: &[usize]) -> Result<Var> {
        let value = {
            let lv = self.value(logits);
            if lv.rows() != targets.len() {
                return Err(Error::shape(format!(
                    "{} logit rows for {} targets",
                    lv.rows(),
                    targets.len()
                )));
            }
            let mut loss = 0.0;
            for (r, &t) in targets.iter().enumerate() {
                let row = lv.row(r);
                if t >= row.len() {
                    return Err(Error::Vocab(format!(
                        "target {t} outside {} classes",
                        row.len()
                    )));
                }
                loss += log_sum_exp(row) - row[t];
            }
            Tensor::scalar(loss)
        };
        Ok(self.push(value, Op::CrossEntropy(logits, targets.to_vec())))
    }

    /// Records an op with a caller-supplied forward value and backward rule.
    pub fn custom(&self, inputs: &[Var], value: Tensor, backward: BackwardFn) -> Var {
        self.push(value, Op::Custom(inputs.to_vec(), backward))
    }

    /// Back-propagates from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let seed = &nodes[loss.0].value;
        if seed.len() != 1 {
            return Err(Error::shape(format!(
                "backward needs a scalar loss, got {:?}",
                seed.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(seed.map(|_| 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            let val = |v: Var| &nodes[v.0].value;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = g.matmul(&val(*b).transpose())?;
                    let db = val(*a).transpose().matmul(&g)?;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.map(|v| -v));
                }
                Op::Mul(a, b) => {
                    accumulate(&mut grads, *a, g.zip_map(val(*b), |x, y| x * y)?);
                    accumulate(&mut grads, *b, g.zip_map(val(*a), |x, y| x * y)?);
                }
                Op::AddRow(x, b) => {
                    let c = g.cols();
                    let mut db = Tensor::zeros(1, c);
                    for r in 0..g.rows() {
                        for (o, v) in db.data_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *x, g.clone());
                    accumulate(&mut grads, *b, db);
                }
                Op::Scale(x, s) => accumulate(&mut grads, *x, g.map(|v| v * s)),
                Op::AddScalar(x) => accumulate(&mut grads, *x, g.clone()),
                Op::ScaleBy(x, s) => {
                    let k = val(*s).item();
                    let ds: f64 = g
                        .data()
                        .iter()
                        .zip(val(*x).data())
                        .map(|(a, b)| a * b)
                        .sum();
                    accumulate(&mut grads, *x, g.map(|v| v * k));
                    accumulate(&mut grads, *s, Tensor::scalar(ds));
                }
                Op::Concat(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = val(p).cols();
                        accumulate(&mut grads, p, g.slice_cols(start, start + w)?);
                        start += w;
                    }
                }
                Op::Slice(x, start, end) => {
                    let xv = val(*x);
                    let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                    for r in 0..xv.rows() {
                        for (j, v) in g.row(r).iter().enumerate() {
                            dx.set(r, start + j, *v);
                        }
                    }
                    debug_assert_eq!(end - start, g.cols());
                    accumulate(&mut grads, *x, dx);
                }
                Op::Transpose(x) => accumulate(&mut grads, *x, g.transpose()),
                Op::Sigmoid(x) => {
                    let dx = g.zip_map(&node.value, |gv, y| gv * y * (1.0 - y))?;
                    accumulate(&mut grads, *x, dx);
                }
                Op::Relu(x) => {
                    let dx = g.zip_map(val(*x), |gv, xv| if xv > 0.0 { gv } else { 0.0 })?;
                    accumulate(&mut grads, *x, dx);
                }
                Op::Tanh(x) => {
                    let dx = g.zip_map(&node.value, |gv, y| gv * (1.0 - y * y))?;
                    accumulate(&mut grads, *x, dx);
                }
                Op::SoftmaxRows(x) => {
                    let y = &node.value;
                    let c = y.cols();
                    let mut dx = g.clone();
                    for ((drow, yrow), grow) in dx
                        .data_mut()
                        .chunks_mut(c)
                        .zip(y.data().chunks(c))
                        .zip(g.data().chunks(c))
                    {
                        let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                        for ((d, &yv), &gv) in drow.iter_mut().zip(yrow).zip(grow) {
                            *d = yv * (gv - dot);
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Spmm(adj, x) => accumulate(&mut grads, *x, adj.spmm_transpose(&g)?),
                Op::Sum(x) => {
                    let k = g.item();
                    accumulate(&mut grads, *x, val(*x).map(|_| k));
                }
                Op::MeanRows(x) => {
                    let xv = val(*x);
                    let n = xv.rows() as f64;
                    let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                    let c = xv.cols();
                    for (i, d) in dx.data_mut().iter_mut().enumerate() {
                        *d = g.data()[i % c] / n;
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Gather(table, indices) => {
                    let tv = val(*table);
                    let mut dt = Tensor::zeros(tv.rows(), tv.cols());
                    let c = tv.cols();
                    for (r, &i) in indices.iter().enumerate() {
                        for (o, v) in dt.data_mut()[i * c..(i + 1) * c].iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *table, dt);
                }
                Op::CrossEntropy(logits, targets) => {
                    let k = g.item();
                    let lv = val(*logits);
                    let c = lv.cols();
                    let mut dl = lv.clone();
                    for (row, &t) in dl.data_mut().chunks_mut(c).zip(targets) {
                        softmax_in_place(row);
                        row[t] -= 1.0;
                        for v in row.iter_mut() {
                            *v *= k;
                        }
                    }
                    accumulate(&mut grads, *logits, dl);
                }
                Op::Custom(inputs, rule) => {
                    let vals: Vec<&Tensor> = inputs.iter().map(|&v| val(v)).collect();
                    let dins = rule(&g, &vals, &node.value);
                    if dins.len() != inputs.len() {
                        return Err(Error::shape("custom backward returned wrong arity"));
                    }
                    for (&v, d) in inputs.iter().zip(dins) {
                        if !d.same_shape(val(v)) {
                            return Err(Error::shape("custom backward returned wrong shape"));
                        }
                        accumulate(&mut grads, v, d);
                    }
                }
            }
            grads[i] = Some(g);
        }

        let mut params: Vec<(ParamId, Tensor)> = self
            .params
            .borrow()
            .iter()
            .map(|&(p, v)| {
                let g = grads
                    .get(v.0)
                    .and_then(|g| g.clone())
                    .unwrap_or_else(|| nodes[v.0].value.map(|_| 0.0));
                (p, g)
            })
            .collect();
        params.sort_by_key(|(p, _)| *p);
        Ok(Gradients { grads, params })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.accumulate(&g),
        slot @ None => *slot = Some(g),
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(ParamId, Tensor)>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, if `v` influenced it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// One entry per bound parameter, zero-filled when the loss did not
    /// depend on it, sorted by id.
    pub fn params(&self) -> &[(ParamId, Tensor)] {
        &self.params
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params.iter().find(|(p, _)| *p == id).map(|(_, g)| g)
    }

    pub fn into_params(self) -> Vec<(ParamId, Tensor)> {
        self.params
    }
}
