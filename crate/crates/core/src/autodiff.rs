//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! Every operation on a [`Var`] appends a node to its [`Tape`]. Nodes are
//! stored in creation order, so inputs always precede the operations that
//! consume them and [`Var::backward`] is a single reverse sweep.
//!
//! ```
//! use fuzzy_cgan::autodiff::Tape;
//! use fuzzy_cgan::tensor::Tensor;
//!
//! let tape = Tape::new();
//! let w = tape.param(Tensor::scalar(3.0));
//! let loss = w.mul(&w).unwrap().sum_all();
//! let grads = loss.backward().unwrap();
//! assert_eq!(grads.wrt(&w).item().unwrap(), 6.0);
//! ```

use std::cell::{Ref, RefCell};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{gemm, Operand, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// Exponential linear unit with alpha = 1.
    Elu,
    Relu,
    Sigmoid,
    /// Natural logarithm. Entries must be strictly positive.
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduction {
    Prod,
    Mean,
    Sum,
}

/// Axis a reduction collapses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Collapse the rows: `m x n -> 1 x n`.
    Rows,
    /// Collapse the columns: `m x n -> m x 1`.
    Cols,
    /// Collapse everything: `m x n -> 1 x 1`.
    All,
}

/// How the right operand of a binary op is expanded to the left's shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    None,
    /// Right operand is `1 x cols`, repeated down the rows.
    Row,
    /// Right operand is `rows x 1`, repeated across the columns.
    Col,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Binary {
        op: BinaryOp,
        a: usize,
        b: usize,
        broadcast: Broadcast,
    },
    Activation {
        a: usize,
        kind: Activation,
    },
    ConcatCols(usize, usize),
    SliceCols {
        a: usize,
        start: usize,
    },
    GatherCols {
        a: usize,
        indices: Vec<usize>,
    },
    Reduce {
        a: usize,
        kind: Reduction,
        axis: Axis,
    },
    Affine {
        a: usize,
        scale: f64,
    },
    Clamp {
        a: usize,
        lo: f64,
        hi: f64,
    },
    Mask {
        a: usize,
        mask: Vec<f64>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records operations for one forward/backward pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).finish()
    }
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

    /// A leaf whose gradient is tracked.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf treated as a constant by [`Var::backward`].
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn requires_grad(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }
}

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    fn node_value(&self) -> Ref<'t, Tensor> {
        Ref::map(self.tape.nodes.borrow(), |n| &n[self.id].value)
    }

    /// Copy of the current value.
    pub fn value(&self) -> Tensor {
        self.node_value().clone()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.node_value().shape()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.requires_grad(self.id)
    }

    fn same_tape(&self, other: &Var<'_>) -> Result<()> {
        if std::ptr::eq(self.tape, other.tape) {
            Ok(())
        } else {
            Err(Error::Contract("operands live on different tapes".into()))
        }
    }

    fn derived(&self, value: Tensor, op: Op, inputs: &[usize]) -> Var<'t> {
        let requires_grad = inputs.iter().any(|&i| self.tape.requires_grad(i));
        self.tape.push(value, op, requires_grad)
    }

    pub fn matmul(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.same_tape(other)?;
        let out = self.node_value().matmul(&other.node_value())?;
        Ok(self.derived(out, Op::MatMul(self.id, other.id), &[self.id, other.id]))
    }

    pub fn elementwise(&self, op: BinaryOp, other: &Var<'t>) -> Result<Var<'t>> {
        self.same_tape(other)?;
        let out = {
            let a = self.node_value();
            let b = other.node_value();
            let broadcast = broadcast_kind(&a, &b, op_name(op))?;
            let f = match op {
                BinaryOp::Add => |x: f64, y: f64| x + y,
                BinaryOp::Sub => |x: f64, y: f64| x - y,
                BinaryOp::Mul => |x: f64, y: f64| x * y,
            };
            (broadcast_zip(&a, &b, broadcast, f), broadcast)
        };
        let (value, broadcast) = out;
        Ok(self.derived(
            value,
            Op::Binary {
                op,
                a: self.id,
                b: other.id,
                broadcast,
            },
            &[self.id, other.id],
        ))
    }

    pub fn add(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.elementwise(BinaryOp::Add, other)
    }

    pub fn sub(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.elementwise(BinaryOp::Sub, other)
    }

    pub fn mul(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.elementwise(BinaryOp::Mul, other)
    }

    pub fn activation(&self, kind: Activation) -> Result<Var<'t>> {
        let out = {
            let a = self.node_value();
            match kind {
                Activation::Elu => a.map(|x| if x >= 0.0 { x } else { x.exp_m1() }),
                Activation::Relu => a.map(|x| x.max(0.0)),
                Activation::Sigmoid => a.map(sigmoid),
                Activation::Log => {
                    if let Some(i) = a.data().iter().position(|&x| x.is_nan() || x <= 0.0) {
                        return Err(Error::domain(
                            "log",
                            format!(
                                "entry ({}, {}) = {} is not positive",
                                i / a.cols(),
                                i % a.cols(),
                                a.data()[i]
                            ),
                        ));
                    }
                    a.map(f64::ln)
                }
            }
        };
        Ok(self.derived(out, Op::Activation { a: self.id, kind }, &[self.id]))
    }

    pub fn elu(&self) -> Var<'t> {
        self.activation(Activation::Elu).expect("elu is total")
    }

    pub fn relu(&self) -> Var<'t> {
        self.activation(Activation::Relu).expect("relu is total")
    }

    pub fn sigmoid(&self) -> Var<'t> {
        self.activation(Activation::Sigmoid)
            .expect("sigmoid is total")
    }

    pub fn ln(&self) -> Result<Var<'t>> {
        self.activation(Activation::Log)
    }

    pub fn concat_cols(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.same_tape(other)?;
        let out = {
            let a = self.node_value();
            let b = other.node_value();
            if a.rows() != b.rows() {
                return Err(Error::Dimension {
                    op: "concat_cols",
                    left: a.shape(),
                    right: b.shape(),
                });
            }
            let (p, q) = (a.cols(), b.cols());
            let mut data = Vec::with_capacity(a.rows() * (p + q));
            for r in 0..a.rows() {
                data.extend_from_slice(a.row(r));
                data.extend_from_slice(b.row(r));
            }
            Tensor::new(a.rows(), p + q, data)?
        };
        Ok(self.derived(out, Op::ConcatCols(self.id, other.id), &[self.id, other.id]))
    }

    pub fn slice_cols(&self, start: usize, len: usize) -> Result<Var<'t>> {
        let out = {
            let a = self.node_value();
            if start + len > a.cols() {
                return Err(Error::Index {
                    op: "slice_cols",
                    detail: format!("columns {start}..{} of {}", start + len, a.cols()),
                });
            }
            Tensor::from_fn(a.rows(), len, |r, c| a.get(r, start + c))
        };
        Ok(self.derived(out, Op::SliceCols { a: self.id, start }, &[self.id]))
    }

    /// Selects columns by index; indices may repeat.
    pub fn gather_cols(&self, indices: &[usize]) -> Result<Var<'t>> {
        let out = {
            let a = self.node_value();
            if let Some(&bad) = indices.iter().find(|&&i| i >= a.cols()) {
                return Err(Error::Index {
                    op: "gather_cols",
                    detail: format!("column {bad} of {}", a.cols()),
                });
            }
            Tensor::from_fn(a.rows(), indices.len(), |r, c| a.get(r, indices[c]))
        };
        Ok(self.derived(
            out,
            Op::GatherCols {
                a: self.id,
                indices: indices.to_vec(),
            },
            &[self.id],
        ))
    }

    pub fn reduce(&self, kind: Reduction, axis: Axis) -> Result<Var<'t>> {
        let out = {
            let a = self.node_value();
            if a.is_empty() {
                return Err(Error::domain("reduce", "empty input"));
            }
            reduce_value(&a, kind, axis)
        };
        Ok(self.derived(
            out,
            Op::Reduce {
                a: self.id,
                kind,
                axis,
            },
            &[self.id],
        ))
    }

    /// Sum of every entry as a 1x1 tensor. Panics on an empty tensor.
    pub fn sum_all(&self) -> Var<'t> {
        self.reduce(Reduction::Sum, Axis::All).expect("non-empty")
    }

    /// Mean of every entry as a 1x1 tensor. Panics on an empty tensor.
    pub fn mean_all(&self) -> Var<'t> {
        self.reduce(Reduction::Mean, Axis::All).expect("non-empty")
    }

    /// `scale * x + shift`, elementwise.
    pub fn affine(&self, scale: f64, shift: f64) -> Var<'t> {
        let out = self.node_value().map(|x| scale * x + shift);
        self.derived(out, Op::Affine { a: self.id, scale }, &[self.id])
    }

    pub fn scale(&self, factor: f64) -> Var<'t> {
        self.affine(factor, 0.0)
    }

    pub fn neg(&self) -> Var<'t> {
        self.affine(-1.0, 0.0)
    }

    /// `1 - x`.
    pub fn one_minus(&self) -> Var<'t> {
        self.affine(-1.0, 1.0)
    }

    /// Clamps into `[lo, hi]`. The gradient is zero outside the interval.
    pub fn clamp(&self, lo: f64, hi: f64) -> Var<'t> {
        let out = self.node_value().map(|x| x.clamp(lo, hi));
        self.derived(out, Op::Clamp { a: self.id, lo, hi }, &[self.id])
    }

    /// Inverted dropout: zeroes entries with probability `rate` and scales the
    /// survivors by `1 / (1 - rate)`. Identity when `training` is false.
    pub fn dropout<R: Rng + ?Sized>(
        &self,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var<'t>> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::domain(
                "dropout",
                format!("rate {rate} outside [0, 1)"),
            ));
        }
        if !training || rate == 0.0 {
            return Ok(*self);
        }
        let keep = 1.0 / (1.0 - rate);
        let (out, mask) = {
            let a = self.node_value();
            let mask: Vec<f64> = (0..a.len())
                .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
                .collect();
            let mut out = a.clone();
            for (v, m) in out.data_mut().iter_mut().zip(&mask) {
                *v *= m;
            }
            (out, mask)
        };
        Ok(self.derived(out, Op::Mask { a: self.id, mask }, &[self.id]))
    }

    /// Reverse sweep from a scalar loss. Returns gradients for every node
    /// that depends on a tracked leaf.
    pub fn backward(&self) -> Result<Gradients> {
        let nodes = self.tape.nodes.borrow();
        let loss = &nodes[self.id];
        if loss.value.shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a 1x1 loss, found {:?}",
                loss.value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.id + 1];
        grads[self.id] = Some(Tensor::scalar(1.0));

        for id in (0..=self.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else {
                continue;
            };
            propagate(&nodes, node, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

/// Gradients produced by [`Var::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: &Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }

    /// Gradient with respect to `var`, or zeros when the loss does not
    /// depend on it.
    pub fn wrt(&self, var: &Var<'_>) -> Tensor {
        match self.get(var) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = var.shape();
                Tensor::zeros(r, c)
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], nodes: &[Node], id: usize, g: Tensor) {
    if !nodes[id].requires_grad {
        return;
    }
    match &mut grads[id] {
        Some(existing) => existing.add_assign(&g),
        slot => *slot = Some(g),
    }
}

fn propagate(nodes: &[Node], node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
    match &node.op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let av = &nodes[*a].value;
            let bv = &nodes[*b].value;
            if nodes[*a].requires_grad {
                let mut da = Tensor::zeros(av.rows(), av.cols());
                gemm(Operand::plain(g), Operand::transposed(bv), &mut da, 0.0);
                accumulate(grads, nodes, *a, da);
            }
            if nodes[*b].requires_grad {
                let mut db = Tensor::zeros(bv.rows(), bv.cols());
                gemm(Operand::transposed(av), Operand::plain(g), &mut db, 0.0);
                accumulate(grads, nodes, *b, db);
            }
        }
        Op::Binary {
            op,
            a,
            b,
            broadcast,
        } => {
            let av = &nodes[*a].value;
            let bv = &nodes[*b].value;
            let (ga, gb_full) = match op {
                BinaryOp::Add => (g.clone(), g.clone()),
                BinaryOp::Sub => (g.clone(), g.map(|x| -x)),
                BinaryOp::Mul => (
                    broadcast_zip(g, bv, *broadcast, |x, y| x * y),
                    g.zip_map(av, |x, y| x * y),
                ),
            };
            accumulate(grads, nodes, *a, ga);
            if nodes[*b].requires_grad {
                let gb = match broadcast {
                    Broadcast::None => gb_full,
                    Broadcast::Row => reduce_value(&gb_full, Reduction::Sum, Axis::Rows),
                    Broadcast::Col => reduce_value(&gb_full, Reduction::Sum, Axis::Cols),
                };
                accumulate(grads, nodes, *b, gb);
            }
        }
        Op::Activation { a, kind } => {
            let x = &nodes[*a].value;
            let y = &node.value;
            let local = match kind {
                Activation::Elu => x.zip_map(y, |x, y| if x >= 0.0 { 1.0 } else { y + 1.0 }),
                Activation::Relu => x.map(|x| if x > 0.0 { 1.0 } else { 0.0 }),
                Activation::Sigmoid => y.map(|s| s * (1.0 - s)),
                Activation::Log => x.map(|x| 1.0 / x),
            };
            accumulate(grads, nodes, *a, g.zip_map(&local, |g, d| g * d));
        }
        Op::ConcatCols(a, b) => {
            let p = nodes[*a].value.cols();
            let q = nodes[*b].value.cols();
            if nodes[*a].requires_grad {
                let ga = Tensor::from_fn(g.rows(), p, |r, c| g.get(r, c));
                accumulate(grads, nodes, *a, ga);
            }
            if nodes[*b].requires_grad {
                let gb = Tensor::from_fn(g.rows(), q, |r, c| g.get(r, p + c));
                accumulate(grads, nodes, *b, gb);
            }
        }
        Op::SliceCols { a, start } => {
            let (rows, cols) = nodes[*a].value.shape();
            let mut ga = Tensor::zeros(rows, cols);
            for r in 0..rows {
                for c in 0..g.cols() {
                    ga.set(r, start + c, g.get(r, c));
                }
            }
            accumulate(grads, nodes, *a, ga);
        }
        Op::GatherCols { a, indices } => {
            let (rows, cols) = nodes[*a].value.shape();
            let mut ga = Tensor::zeros(rows, cols);
            for r in 0..rows {
                for (c, &src) in indices.iter().enumerate() {
                    let v = ga.get(r, src) + g.get(r, c);
                    ga.set(r, src, v);
                }
            }
            accumulate(grads, nodes, *a, ga);
        }
        Op::Reduce { a, kind, axis } => {
            let x = &nodes[*a].value;
            let (rows, cols) = x.shape();
            let upstream = |r: usize, c: usize| match axis {
                Axis::Rows => g.get(0, c),
                Axis::Cols => g.get(r, 0),
                Axis::All => g.get(0, 0),
            };
            let ga = match kind {
                Reduction::Sum => Tensor::from_fn(rows, cols, upstream),
                Reduction::Mean => {
                    let n = match axis {
                        Axis::Rows => rows,
                        Axis::Cols => cols,
                        Axis::All => rows * cols,
                    } as f64;
                    Tensor::from_fn(rows, cols, |r, c| upstream(r, c) / n)
                }
                Reduction::Prod => {
                    let loo = leave_one_out_products(x, *axis);
                    Tensor::from_fn(rows, cols, |r, c| upstream(r, c) * loo.get(r, c))
                }
            };
            accumulate(grads, nodes, *a, ga);
        }
        Op::Affine { a, scale } => {
            accumulate(grads, nodes, *a, g.map(|x| x * scale));
        }
        Op::Clamp { a, lo, hi } => {
            let x = &nodes[*a].value;
            let ga = g.zip_map(x, |g, x| if x >= *lo && x <= *hi { g } else { 0.0 });
            accumulate(grads, nodes, *a, ga);
        }
        Op::Mask { a, mask } => {
            let mut ga = g.clone();
            for (v, m) in ga.data_mut().iter_mut().zip(mask) {
                *v *= m;
            }
            accumulate(grads, nodes, *a, ga);
        }
    }
}

/// For each entry, the product of the other entries in its reduction group.
/// Uses prefix and suffix products so zero entries need no division.
fn leave_one_out_products(x: &Tensor, axis: Axis) -> Tensor {
    let (rows, cols) = x.shape();
    let mut out = Tensor::zeros(rows, cols);
    let mut fill = |positions: &mut dyn Iterator<Item = (usize, usize)>| {
        let positions: Vec<(usize, usize)> = positions.collect();
        let n = positions.len();
        let mut prefix = vec![1.0; n + 1];
        for (i, &(r, c)) in positions.iter().enumerate() {
            prefix[i + 1] = prefix[i] * x.get(r, c);
        }
        let mut suffix = 1.0;
        for (i, &(r, c)) in positions.iter().enumerate().rev() {
            out.set(r, c, prefix[i] * suffix);
            suffix *= x.get(r, c);
        }
    };
    match axis {
        Axis::Rows => {
            for c in 0..cols {
                fill(&mut (0..rows).map(|r| (r, c)));
            }
        }
        Axis::Cols => {
            for r in 0..rows {
                fill(&mut (0..cols).map(|c| (r, c)));
            }
        }
        Axis::All => fill(&mut (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c)))),
    }
    out
}

fn reduce_value(x: &Tensor, kind: Reduction, axis: Axis) -> Tensor {
    let (rows, cols) = x.shape();
    let combine = |values: &mut dyn Iterator<Item = f64>, n: usize| -> f64 {
        match kind {
            Reduction::Sum => values.sum(),
            Reduction::Mean => values.sum::<f64>() / n as f64,
            Reduction::Prod => values.product(),
        }
    };
    match axis {
        Axis::Rows => Tensor::from_fn(1, cols, |_, c| {
            combine(&mut (0..rows).map(|r| x.get(r, c)), rows)
        }),
        Axis::Cols => Tensor::from_fn(rows, 1, |r, _| combine(&mut x.row(r).iter().copied(), cols)),
        Axis::All => Tensor::scalar(combine(&mut x.data().iter().copied(), x.len())),
    }
}

fn op_name(op: BinaryOp) -> &'static str {
    match op {
        BinaryOp::Add => "add",
        BinaryOp::Sub => "sub",
        BinaryOp::Mul => "mul",
    }
}

fn broadcast_kind(a: &Tensor, b: &Tensor, op: &'static str) -> Result<Broadcast> {
    if a.shape() == b.shape() {
        Ok(Broadcast::None)
    } else if b.shape() == (1, a.cols()) {
        Ok(Broadcast::Row)
    } else if b.shape() == (a.rows(), 1) {
        Ok(Broadcast::Col)
    } else {
        Err(Error::Dimension {
            op,
            left: a.shape(),
            right: b.shape(),
        })
    }
}

fn broadcast_zip(a: &Tensor, b: &Tensor, broadcast: Broadcast, f: impl Fn(f64, f64) -> f64) -> Tensor {
    match broadcast {
        Broadcast::None => a.zip_map(b, f),
        Broadcast::Row => Tensor::from_fn(a.rows(), a.cols(), |r, c| f(a.get(r, c), b.get(0, c))),
        Broadcast::Col => Tensor::from_fn(a.rows(), a.cols(), |r, c| f(a.get(r, c), b.get(r, 0))),
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(rows)
    }

    #[test]
    fn add_and_mul_values() {
        let tape = Tape::new();
        let a = tape.constant(t(&[&[1.0, 2.0]]));
        let b = tape.constant(t(&[&[3.0, 4.0]]));
        assert_eq!(a.add(&b).unwrap().value(), t(&[&[4.0, 6.0]]));
        let a = tape.constant(t(&[&[0.2, 0.9]]));
        let b = tape.constant(t(&[&[0.5, 0.1]]));
        let p = a.mul(&b).unwrap().value();
        assert!((p.get(0, 0) - 0.1).abs() < 1e-15);
        assert!((p.get(0, 1) - 0.09).abs() < 1e-15);
    }

    #[test]
    fn incompatible_broadcast_is_rejected() {
        let tape = Tape::new();
        let a = tape.constant(Tensor::zeros(3, 2));
        let b = tape.constant(Tensor::zeros(2, 2));
        assert!(matches!(a.add(&b), Err(Error::Dimension { .. })));
    }

    #[test]
    fn row_broadcast_gradient_is_column_sum() {
        let tape = Tape::new();
        let a = tape.constant(Tensor::zeros(3, 2));
        let row = tape.param(t(&[&[1.0, -1.0]]));
        let weights = tape.constant(t(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]));
        let loss = a.add(&row).unwrap().mul(&weights).unwrap().sum_all();
        let g = loss.backward().unwrap().wrt(&row);
        assert_eq!(g, t(&[&[9.0, 12.0]]));
    }

    #[test]
    fn activations_at_reference_points() {
        let tape = Tape::new();
        let x = tape.param(t(&[&[0.0, 2.0, -50.0]]));
        let s = x.sigmoid().value();
        assert_eq!(s.get(0, 0), 0.5);
        let e = x.elu().value();
        assert_eq!(e.get(0, 1), 2.0);
        assert!((e.get(0, 2) + 1.0).abs() < 1e-15);

        let tape = Tape::new();
        let x = tape.param(Tensor::scalar(0.0));
        let g = x.sigmoid().sum_all().backward().unwrap().wrt(&x);
        assert_eq!(g.item().unwrap(), 0.25);
    }

    #[test]
    fn log_of_non_positive_names_the_index() {
        let tape = Tape::new();
        let x = tape.constant(t(&[&[1.0, 2.0], &[0.5, 0.0]]));
        let err = x.ln().unwrap_err().to_string();
        assert!(err.contains("(1, 1)"), "{err}");
    }

    #[test]
    fn concat_and_slice() {
        let tape = Tape::new();
        let a = tape.constant(t(&[&[1.0]]));
        let b = tape.constant(t(&[&[2.0]]));
        assert_eq!(a.concat_cols(&b).unwrap().value(), t(&[&[1.0, 2.0]]));

        let a = tape.constant(Tensor::ones(2, 3));
        let empty = tape.constant(Tensor::zeros(2, 0));
        assert_eq!(a.concat_cols(&empty).unwrap().value(), Tensor::ones(2, 3));

        let r = tape.constant(Tensor::zeros(3, 1));
        assert!(a.concat_cols(&r).is_err());

        let a = tape.constant(t(&[&[1.0, 2.0, 3.0]]));
        assert_eq!(a.slice_cols(0, 2).unwrap().value(), t(&[&[1.0, 2.0]]));
        assert_eq!(a.slice_cols(0, 3).unwrap().value(), a.value());
        assert!(matches!(a.slice_cols(2, 2), Err(Error::Index { .. })));
    }

    #[test]
    fn concat_gradient_splits_ones() {
        let tape = Tape::new();
        let a = tape.param(Tensor::full(2, 2, 0.3));
        let b = tape.param(Tensor::full(2, 1, -0.7));
        let grads = a.concat_cols(&b).unwrap().sum_all().backward().unwrap();
        assert_eq!(grads.wrt(&a), Tensor::ones(2, 2));
        assert_eq!(grads.wrt(&b), Tensor::ones(2, 1));
    }

    #[test]
    fn slice_gradient_is_one_hot() {
        let tape = Tape::new();
        let a = tape.param(t(&[&[1.0, 2.0, 3.0]]));
        let g = a.slice_cols(1, 1).unwrap().sum_all().backward().unwrap().wrt(&a);
        assert_eq!(g, t(&[&[0.0, 1.0, 0.0]]));
    }

    #[test]
    fn reductions() {
        let tape = Tape::new();
        let a = tape.param(t(&[&[0.5, 0.5]]));
        let p = a.reduce(Reduction::Prod, Axis::Cols).unwrap();
        assert_eq!(p.value(), t(&[&[0.25]]));

        let m = tape.constant(t(&[&[1.0, 2.0], &[3.0, 4.0]]));
        assert_eq!(m.mean_all().value().item().unwrap(), 2.5);
        assert_eq!(
            m.reduce(Reduction::Sum, Axis::Rows).unwrap().value(),
            t(&[&[4.0, 6.0]])
        );

        let empty = tape.constant(Tensor::zeros(0, 3));
        assert!(matches!(
            empty.reduce(Reduction::Sum, Axis::All),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn prod_gradient_at_zero_is_product_of_others() {
        let tape = Tape::new();
        let a = tape.param(t(&[&[0.0, 3.0, 0.5]]));
        let p = a.reduce(Reduction::Prod, Axis::Cols).unwrap();
        assert_eq!(p.value().item().unwrap(), 0.0);
        let g = p.sum_all().backward().unwrap().wrt(&a);
        assert_eq!(g, t(&[&[1.5, 0.0, 0.0]]));
    }

    #[test]
    fn backward_trivial_cases() {
        let tape = Tape::new();
        let w = tape.param(Tensor::full(2, 2, 0.1));
        assert_eq!(w.sum_all().backward().unwrap().wrt(&w), Tensor::ones(2, 2));

        let tape = Tape::new();
        let w = tape.param(Tensor::scalar(3.0));
        let g = w.mul(&w).unwrap().sum_all().backward().unwrap().wrt(&w);
        assert_eq!(g.item().unwrap(), 6.0);
    }

    #[test]
    fn backward_requires_scalar() {
        let tape = Tape::new();
        let w = tape.param(Tensor::ones(2, 1));
        assert!(matches!(w.backward(), Err(Error::Contract(_))));
    }

    #[test]
    fn constants_receive_no_gradient() {
        let tape = Tape::new();
        let c = tape.constant(Tensor::ones(1, 2));
        let w = tape.param(Tensor::ones(1, 2));
        let grads = c.mul(&w).unwrap().sum_all().backward().unwrap();
        assert!(grads.get(&c).is_none());
        assert!(grads.get(&w).is_some());
    }

    #[test]
    fn dropout_identity_cases_and_rate_check() {
        let mut rng = crate::seeded_rng(1);
        let tape = Tape::new();
        let x = tape.param(Tensor::full(4, 4, 2.0));
        assert_eq!(x.dropout(0.0, true, &mut rng).unwrap().value(), x.value());
        assert_eq!(x.dropout(0.5, false, &mut rng).unwrap().value(), x.value());
        assert!(x.dropout(1.0, true, &mut rng).is_err());
        assert!(x.dropout(-0.1, true, &mut rng).is_err());
    }

    #[test]
    fn gather_gradient_accumulates_repeats() {
        let tape = Tape::new();
        let a = tape.param(t(&[&[1.0, 2.0]]));
        let g = a
            .gather_cols(&[0, 0, 1])
            .unwrap()
            .sum_all()
            .backward()
            .unwrap()
            .wrt(&a);
        assert_eq!(g, t(&[&[2.0, 1.0]]));
    }
}
