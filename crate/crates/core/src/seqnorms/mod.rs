//! Norms on finite sequences of matrices: row and column Gram norms, their
//! intersection (max) and sum (infimal convolution, solved numerically).

pub(crate) mod spectral;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lorentz::{from_sorted_levels, lorentz_norm, Exponents, StepFunction};
use crate::matcore::{singular_values, ComplexMatrix};
use spectral::{Block, Layout, Program, SolveOptions, Term};

/// Default iteration budget of the splitting optimizer.
pub const DEFAULT_BUDGET: usize = 2000;
/// Relative duality gap at which the optimizer stops.
pub const DEFAULT_REL_GAP: f64 = 1e-4;

/// A nonempty sequence (x_1, …, x_N) of equally shaped complex matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ComplexMatrix>", into = "Vec<ComplexMatrix>")]
pub struct MatrixSeq {
    items: Vec<ComplexMatrix>,
}

impl TryFrom<Vec<ComplexMatrix>> for MatrixSeq {
    type Error = Error;
    fn try_from(items: Vec<ComplexMatrix>) -> Result<Self> {
        MatrixSeq::new(items)
    }
}

impl From<MatrixSeq> for Vec<ComplexMatrix> {
    fn from(s: MatrixSeq) -> Self {
        s.items
    }
}

impl MatrixSeq {
    pub fn new(items: Vec<ComplexMatrix>) -> Result<Self> {
        let first = items.first().ok_or(Error::EmptySequence)?.shape();
        for x in &items {
            if x.shape() != first {
                return Err(Error::SequenceShape(first, x.shape()));
            }
            if !x.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(MatrixSeq { items })
    }

    pub fn zeros(len: usize, rows: usize, cols: usize) -> Self {
        assert!(len > 0);
        MatrixSeq {
            items: vec![ComplexMatrix::zeros(rows, cols); len],
        }
    }

    pub fn single(a: ComplexMatrix) -> Self {
        MatrixSeq { items: vec![a] }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Shape (rows, cols) shared by every item.
    pub fn shape(&self) -> (usize, usize) {
        self.items[0].shape()
    }

    pub fn items(&self) -> &[ComplexMatrix] {
        &self.items
    }

    pub fn items_mut(&mut self) -> &mut [ComplexMatrix] {
        &mut self.items
    }

    pub fn into_items(self) -> Vec<ComplexMatrix> {
        self.items
    }

    pub fn map(&self, f: impl FnMut(&ComplexMatrix) -> ComplexMatrix) -> MatrixSeq {
        MatrixSeq {
            items: self.items.iter().map(f).collect(),
        }
    }

    pub fn zip_map(
        &self,
        other: &MatrixSeq,
        mut f: impl FnMut(&ComplexMatrix, &ComplexMatrix) -> ComplexMatrix,
    ) -> MatrixSeq {
        assert_eq!(self.len(), other.len());
        MatrixSeq {
            items: self
                .items
                .iter()
                .zip(&other.items)
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &MatrixSeq) -> MatrixSeq {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &MatrixSeq) -> MatrixSeq {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> MatrixSeq {
        self.map(|a| a.scale(c))
    }

    /// self += c · other.
    pub fn axpy(&mut self, c: f64, other: &MatrixSeq) {
        for (a, b) in self.items.iter_mut().zip(&other.items) {
            a.axpy(c, b);
        }
    }

    pub fn adjoint(&self) -> MatrixSeq {
        self.map(|a| a.adjoint())
    }

    /// ℓ2(S_2) norm: sqrt(Σ ‖x_n‖_F²).
    pub fn frob_norm(&self) -> f64 {
        self.items.iter().map(|a| a.frob_norm_sq()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.items.iter().map(|a| a.max_abs()).fold(0.0, f64::max)
    }

    /// Re Σ_n tr(x_n y_n*).
    pub fn re_inner(&self, other: &MatrixSeq) -> f64 {
        self.items
            .iter()
            .zip(&other.items)
            .map(|(a, b)| a.re_inner(b))
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.max_abs() == 0.0
    }

    /// [x_1 x_2 … x_N]; its singular values are those of (Σ x_n x_n*)^{1/2}.
    pub fn row_block(&self) -> ComplexMatrix {
        ComplexMatrix::hstack(&self.items)
    }

    /// [x_1; x_2; …; x_N]; its singular values are those of (Σ x_n* x_n)^{1/2}.
    pub fn col_block(&self) -> ComplexMatrix {
        ComplexMatrix::vstack(&self.items)
    }
}

/// A split x = y + z together with the measured cost and certified gap.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SumSplit {
    pub y: MatrixSeq,
    pub z: MatrixSeq,
    /// Value of the split (an upper bound on the infimum).
    pub cost: f64,
    /// Certified lower bound on the infimum from a dual-feasible point.
    pub lower: f64,
    /// cost − lower.
    pub gap: f64,
    pub iterations: usize,
}

/// Σ x_n x_n*.
pub fn gram_row(x: &MatrixSeq) -> ComplexMatrix {
    let (n, _) = x.shape();
    let mut g = ComplexMatrix::zeros(n, n);
    for a in x.items() {
        g = &g + &a.mul_adj(a);
    }
    g
}

/// Σ x_n* x_n.
pub fn gram_col(x: &MatrixSeq) -> ComplexMatrix {
    let (_, m) = x.shape();
    let mut g = ComplexMatrix::zeros(m, m);
    for a in x.items() {
        g = &g + &a.adj_mul(a);
    }
    g
}

/// s-numbers of (Σ x_n x_n*)^{1/2}.
pub fn row_s_numbers(x: &MatrixSeq) -> Result<StepFunction> {
    Ok(from_sorted_levels(&singular_values(&x.row_block())?, 1.0))
}

/// s-numbers of (Σ x_n* x_n)^{1/2}.
pub fn col_s_numbers(x: &MatrixSeq) -> Result<StepFunction> {
    Ok(from_sorted_levels(&singular_values(&x.col_block())?, 1.0))
}

/// ‖(Σ x_n x_n*)^{1/2}‖_{S_{p,q}}.
pub fn row_norm(x: &MatrixSeq, e: Exponents) -> Result<f64> {
    lorentz_norm(&row_s_numbers(x)?, e)
}

/// ‖(Σ x_n* x_n)^{1/2}‖_{S_{p,q}}.
pub fn col_norm(x: &MatrixSeq, e: Exponents) -> Result<f64> {
    lorentz_norm(&col_s_numbers(x)?, e)
}

pub fn intersect_norm(x: &MatrixSeq, e: Exponents) -> Result<f64> {
    Ok(row_norm(x, e)?.max(col_norm(x, e)?))
}

/// inf over x = y + z of ‖y‖_{row} + ‖z‖_{col} for Schatten exponents (p = q).
///
/// Returns `BudgetExhausted` with the best split found when the certified relative
/// gap is still above [`DEFAULT_REL_GAP`] after `budget` iterations.
pub fn sum_norm(x: &MatrixSeq, e: Exponents, budget: usize) -> Result<SumSplit> {
    let split = sum_norm_unchecked(x, e, budget, DEFAULT_REL_GAP)?;
    if split.gap > DEFAULT_REL_GAP * split.cost.max(f64::MIN_POSITIVE) {
        return Err(Error::BudgetExhausted(Box::new(split)));
    }
    Ok(split)
}

/// Like [`sum_norm`] but always returns the best split, whatever its gap.
pub fn sum_norm_unchecked(
    x: &MatrixSeq,
    e: Exponents,
    budget: usize,
    rel_gap: f64,
) -> Result<SumSplit> {
    if !e.is_schatten() || e.p < 1.0 {
        return Err(Error::InvalidExponent(format!(
            "sum norm is implemented for Schatten exponents p = q ≥ 1, got ({}, {})",
            e.p, e.q
        )));
    }
    let r = e.p;
    if x.is_zero() {
        return Ok(SumSplit {
            y: x.clone(),
            z: x.clone(),
            cost: 0.0,
            lower: 0.0,
            gap: 0.0,
            iterations: 0,
        });
    }
    // one variable y; the column block sees x − y
    let program = Program::new(
        1,
        x,
        vec![
            Term::new(1.0, r, vec![Block::new(Layout::Row, vec![1.0], None)]),
            Term::new(1.0, r, vec![Block::new(Layout::Col, vec![-1.0], Some(x.clone()))]),
        ],
    );
    let row = row_norm(x, e)?;
    let col = col_norm(x, e)?;
    let init = if row <= col { x.clone() } else { x.scale(0.0) };
    let seeds = vec![
        spectral::norming_dual(x, Layout::Row, r)?,
        spectral::norming_dual(x, Layout::Col, r)?,
    ];
    let sol = program.solve(
        vec![init],
        &seeds
            .into_iter()
            .map(|d| vec![vec![d.clone()], vec![d]])
            .collect::<Vec<_>>(),
        SolveOptions {
            budget,
            rel_gap,
            ..SolveOptions::default()
        },
    )?;
    let y = sol.vars.into_iter().next().unwrap();
    let z = x.sub(&y);
    Ok(SumSplit {
        y,
        z,
        cost: sol.cost,
        lower: sol.lower,
        gap: (sol.cost - sol.lower).max(0.0),
        iterations: sol.iterations,
    })
}
