//! Product-family differentiable fuzzy logic.
//!
//! A network head of width `N` is read as `N` truth values and split into
//! four groups `a | b | c | d`. The head's truth value is
//!
//! ```text
//! A( I( T(a*, b*), S(c*, d*) ) )
//! ```
//!
//! with the product t-norm `T`, its dual t-conorm `S`, a sigmoid-sharpened
//! Reichenbach implication `I` and the product aggregator `A`. Groups of
//! unequal length are harmonized by cyclic column repetition before being
//! combined.
//!
//! The free functions in this module operate on plain [`Tensor`]s and check
//! that their inputs are truth values. The [`graph`] submodule has the same
//! operators on [`Var`]s for use inside a network.

use serde::{Deserialize, Serialize};

use crate::autodiff::{sigmoid, Axis, Reduction, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Steepness of the sigmoidal implication.
pub const IMPLICATION_STEEPNESS: f64 = 9.0;

/// Sizes of the four groups a head is split into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[usize; 4]", into = "[usize; 4]")]
pub struct FuzzyPartition {
    j: usize,
    k: usize,
    l: usize,
    m: usize,
}

impl FuzzyPartition {
    pub fn new(j: usize, k: usize, l: usize, m: usize) -> Result<Self> {
        if j == 0 || k == 0 || l == 0 || m == 0 {
            return Err(Error::Spec(format!(
                "fuzzy partition sizes must all be at least 1, got ({j}, {k}, {l}, {m})"
            )));
        }
        Ok(Self { j, k, l, m })
    }

    /// Head width `N = j + k + l + m`.
    pub fn width(&self) -> usize {
        self.j + self.k + self.l + self.m
    }

    pub fn sizes(&self) -> [usize; 4] {
        [self.j, self.k, self.l, self.m]
    }

    /// Length of the harmonized antecedent pair, `max(j, k)`.
    pub fn antecedent_len(&self) -> usize {
        self.j.max(self.k)
    }

    /// Length of the harmonized consequent pair, `max(l, m)`.
    pub fn consequent_len(&self) -> usize {
        self.l.max(self.m)
    }

    /// Number of implications that get aggregated.
    pub fn implication_count(&self) -> usize {
        self.antecedent_len().max(self.consequent_len())
    }

    /// Head column indices of `a*`, `b*`, `c*` and `d*`.
    pub fn harmonized_columns(&self) -> [Vec<usize>; 4] {
        let [j, k, l, m] = self.sizes();
        let ab = self.antecedent_len();
        let cd = self.consequent_len();
        [
            cyclic(0, j, ab),
            cyclic(j, k, ab),
            cyclic(j + k, l, cd),
            cyclic(j + k + l, m, cd),
        ]
    }
}

impl Default for FuzzyPartition {
    /// `N = 5` split as `1, 2, 1, 1`.
    fn default() -> Self {
        Self {
            j: 1,
            k: 2,
            l: 1,
            m: 1,
        }
    }
}

impl TryFrom<[usize; 4]> for FuzzyPartition {
    type Error = Error;

    fn try_from([j, k, l, m]: [usize; 4]) -> Result<Self> {
        Self::new(j, k, l, m)
    }
}

impl From<FuzzyPartition> for [usize; 4] {
    fn from(p: FuzzyPartition) -> Self {
        p.sizes()
    }
}

/// `len` indices starting at `offset`, repeated cyclically to `target`.
pub fn cyclic(offset: usize, len: usize, target: usize) -> Vec<usize> {
    (0..target).map(|i| offset + i % len).collect()
}

fn check_truth(op: &'static str, t: &Tensor) -> Result<()> {
    match t.data().iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(i) => Err(Error::domain(
            op,
            format!("entry {} = {} is not a truth value in [0, 1]", i, t.data()[i]),
        )),
        None => Ok(()),
    }
}

fn check_pair(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    check_truth(op, a)?;
    check_truth(op, b)
}

/// Product t-norm `a * b`.
pub fn t_norm(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_pair("t_norm", a, b)?;
    Ok(a.zip_map(b, |x, y| x * y))
}

/// Probabilistic sum `a + b - a * b`.
pub fn t_conorm(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_pair("t_conorm", a, b)?;
    Ok(a.zip_map(b, |x, y| x + y - x * y))
}

/// Reichenbach implication `1 - t + t * s`.
pub fn reichenbach(t: &Tensor, s: &Tensor) -> Result<Tensor> {
    check_pair("reichenbach", t, s)?;
    Ok(t.zip_map(s, |t, s| 1.0 - t + t * s))
}

/// Sigmoid rescaling applied to a Reichenbach value `x`, fixing 0 and 1.
pub fn sigmoidal_rescale(x: f64) -> f64 {
    let half = IMPLICATION_STEEPNESS / 2.0;
    let e = half.exp();
    // rounding can overshoot the endpoints by a few ulps
    (((1.0 + e) * sigmoid(IMPLICATION_STEEPNESS * (x - 0.5)) - 1.0) / (e - 1.0)).clamp(0.0, 1.0)
}

/// Sigmoidal implication built on [`reichenbach`].
pub fn sigmoidal_implication(t: &Tensor, s: &Tensor) -> Result<Tensor> {
    check_pair("sigmoidal_implication", t, s)?;
    Ok(reichenbach(t, s)?.map(sigmoidal_rescale))
}

/// Per-row product over the columns of a `batch x M` tensor.
pub fn product_aggregate(implications: &Tensor) -> Result<Tensor> {
    if implications.cols() == 0 {
        return Err(Error::domain("product_aggregate", "no implication columns"));
    }
    check_truth("product_aggregate", implications)?;
    Ok(Tensor::from_fn(implications.rows(), 1, |r, _| {
        implications.row(r).iter().product()
    }))
}

/// Differentiable versions of the operators, recorded on a tape.
///
/// These do not range-check their inputs; callers feed sigmoid outputs.
pub mod graph {
    use super::*;

    pub fn t_norm<'t>(a: &Var<'t>, b: &Var<'t>) -> Result<Var<'t>> {
        a.mul(b)
    }

    pub fn t_conorm<'t>(a: &Var<'t>, b: &Var<'t>) -> Result<Var<'t>> {
        a.add(b)?.sub(&a.mul(b)?)
    }

    pub fn reichenbach<'t>(t: &Var<'t>, s: &Var<'t>) -> Result<Var<'t>> {
        Ok(t.mul(s)?.sub(t)?.affine(1.0, 1.0))
    }

    pub fn sigmoidal_rescale<'t>(x: &Var<'t>) -> Var<'t> {
        let half = IMPLICATION_STEEPNESS / 2.0;
        let e = half.exp();
        x.affine(IMPLICATION_STEEPNESS, -half)
            .sigmoid()
            .affine((1.0 + e) / (e - 1.0), -1.0 / (e - 1.0))
            .clamp(0.0, 1.0)
    }

    pub fn sigmoidal_implication<'t>(t: &Var<'t>, s: &Var<'t>) -> Result<Var<'t>> {
        Ok(sigmoidal_rescale(&reichenbach(t, s)?))
    }

    pub fn product_aggregate<'t>(implications: &Var<'t>) -> Result<Var<'t>> {
        if implications.shape().1 == 0 {
            return Err(Error::domain("product_aggregate", "no implication columns"));
        }
        implications.reduce(Reduction::Prod, Axis::Cols)
    }
}

/// The four harmonized groups of a head.
#[derive(Clone, Copy, Debug)]
pub struct Harmonized<'t> {
    pub a: Var<'t>,
    pub b: Var<'t>,
    pub c: Var<'t>,
    pub d: Var<'t>,
}

/// Splits a `batch x N` head into `a | b | c | d` and cyclically repeats the
/// shorter member of each pair to the longer one's length.
pub fn partition_and_harmonize<'t>(
    head: &Var<'t>,
    spec: &FuzzyPartition,
) -> Result<Harmonized<'t>> {
    let (rows, cols) = head.shape();
    if cols != spec.width() {
        return Err(Error::Dimension {
            op: "partition_and_harmonize",
            left: (rows, cols),
            right: (rows, spec.width()),
        });
    }
    let [a, b, c, d] = spec.harmonized_columns();
    Ok(Harmonized {
        a: head.gather_cols(&a)?,
        b: head.gather_cols(&b)?,
        c: head.gather_cols(&c)?,
        d: head.gather_cols(&d)?,
    })
}

/// Intermediate values of one [`fuzzy_forward`] pass.
#[derive(Clone, Copy, Debug)]
pub struct FuzzyTrace<'t> {
    /// Conjunctions `T(a*, b*)`, `batch x max(j, k)`.
    pub conjunction: Var<'t>,
    /// Disjunctions `S(c*, d*)`, `batch x max(l, m)`.
    pub disjunction: Var<'t>,
    /// Reichenbach implications before the sigmoid rescale, `batch x M`.
    pub reichenbach: Var<'t>,
    /// Sigmoidal implications, `batch x M`.
    pub implication: Var<'t>,
    /// Aggregated truth value per row, `batch x 1`.
    pub output: Var<'t>,
}

/// Truth value of each row of a `batch x N` head, as `batch x 1`.
///
/// The head must already hold values in `[0, 1]`.
pub fn fuzzy_forward<'t>(head: &Var<'t>, spec: &FuzzyPartition) -> Result<Var<'t>> {
    Ok(fuzzy_trace(head, spec)?.output)
}

/// [`fuzzy_forward`] that also returns every intermediate stage.
pub fn fuzzy_trace<'t>(head: &Var<'t>, spec: &FuzzyPartition) -> Result<FuzzyTrace<'t>> {
    let h = partition_and_harmonize(head, spec)?;
    let conjunction = graph::t_norm(&h.a, &h.b)?;
    let disjunction = graph::t_conorm(&h.c, &h.d)?;
    let m = spec.implication_count();
    let t = conjunction.gather_cols(&cyclic(0, spec.antecedent_len(), m))?;
    let s = disjunction.gather_cols(&cyclic(0, spec.consequent_len(), m))?;
    let reichenbach = graph::reichenbach(&t, &s)?;
    let implication = graph::sigmoidal_rescale(&reichenbach);
    let output = graph::product_aggregate(&implication)?;
    Ok(FuzzyTrace {
        conjunction,
        disjunction,
        reichenbach,
        implication,
        output,
    })
}
