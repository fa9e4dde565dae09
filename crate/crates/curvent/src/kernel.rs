//! Markov kernels on finite spaces: validation, adjoints, mixtures and
//! conditional-expectation kernels.
//!
//! A kernel is a row-stochastic matrix `T(x, y)`. Throughout the crate
//! kernels are paired with a space whose measure `P` they leave
//! stationary; the adjoint is then taken in `L^2(P)`:
//!
//! ```text
//!   T*(x, y) = P(y) T(y, x) / P(x),
//! ```
//!
//! which is again a stochastic matrix exactly when `P` is stationary for
//! `T`. Conditional-expectation kernels, the building blocks of all the
//! block-dynamics models, resample the state inside the cell of a
//! partition from the restricted reference measure; they are self-adjoint
//! and idempotent, and both facts are covered by tests rather than taken
//! on faith.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::space::{FiniteSpace, NORMALIZATION_TOL};

/// Row-stochastic matrix on a finite space, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovKernel<S: Scalar = f64> {
    n: usize,
    rows: Vec<S>,
}

impl<S: Scalar> MarkovKernel<S> {
    /// Builds a kernel from rows, checking nonnegativity and row sums.
    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::domain("kernel must have at least one row"));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (x, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::domain(format!(
                    "row {x} has {} entries in a {n}-state kernel",
                    row.len()
                )));
            }
            if row.iter().any(|v| *v < S::zero()) {
                return Err(Error::domain(format!("row {x} has a negative entry")));
            }
            let sum = row.iter().fold(S::zero(), |a, b| a + b.clone());
            let ok = if S::exact() {
                sum == S::one()
            } else {
                (sum.to_f64() - 1.0).abs() <= NORMALIZATION_TOL
            };
            if !ok {
                return Err(Error::domain(format!("row {x} sums to {sum}, not 1")));
            }
            flat.extend(row);
        }
        Ok(MarkovKernel { n, rows: flat })
    }

    /// Identity kernel.
    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("kernel must have at least one row"));
        }
        let mut rows = vec![S::zero(); n * n];
        for x in 0..n {
            rows[x * n + x] = S::one();
        }
        Ok(MarkovKernel { n, rows })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, x: usize) -> &[S] {
        &self.rows[x * self.n..(x + 1) * self.n]
    }

    pub fn transition(&self, x: usize, y: usize) -> &S {
        &self.rows[x * self.n + y]
    }

    /// Indices and masses of the positive entries of row `x`.
    pub fn row_support(&self, x: usize) -> Vec<(usize, S)> {
        self.row(x)
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > S::zero())
            .map(|(y, v)| (y, v.clone()))
            .collect()
    }

    /// `(Tf)(x) = sum_y T(x, y) f(y)`.
    pub fn apply(&self, f: &[S]) -> Vec<S> {
        assert_eq!(f.len(), self.n, "function length mismatch");
        (0..self.n)
            .map(|x| {
                self.row(x)
                    .iter()
                    .zip(f)
                    .fold(S::zero(), |acc, (t, v)| acc + t.clone() * v.clone())
            })
            .collect()
    }

    /// Whether `P` is stationary: `sum_x P(x) T(x, y) = P(y)` for all `y`,
    /// exactly for exact scalars and within `tol` (relative) for floats.
    pub fn is_stationary(&self, space: &FiniteSpace<S>, tol: f64) -> bool {
        if space.len() != self.n {
            return false;
        }
        let p = space.p();
        for y in 0..self.n {
            let mass = (0..self.n).fold(S::zero(), |acc, x| {
                acc + p[x].clone() * self.transition(x, y).clone()
            });
            if S::exact() {
                if mass != p[y] {
                    return false;
                }
            } else if (mass.to_f64() - p[y].to_f64()).abs() > tol * p[y].to_f64().max(1.0) {
                return false;
            }
        }
        true
    }

    /// Adjoint in `L^2(P)`. Fails if `P` is not stationary, since the
    /// result would not be stochastic.
    pub fn adjoint(&self, space: &FiniteSpace<S>) -> Result<MarkovKernel<S>> {
        if space.len() != self.n {
            return Err(Error::usage(format!(
                "kernel on {} states, space has {}",
                self.n,
                space.len()
            )));
        }
        if !self.is_stationary(space, NORMALIZATION_TOL) {
            return Err(Error::domain(
                "adjoint requires the space's measure to be stationary for the kernel",
            ));
        }
        let p = space.p();
        let mut rows = vec![S::zero(); self.n * self.n];
        for x in 0..self.n {
            for y in 0..self.n {
                rows[x * self.n + y] =
                    p[y].clone() * self.transition(y, x).clone() / p[x].clone();
            }
        }
        Ok(MarkovKernel { n: self.n, rows })
    }

    /// Whether `T = T*` in `L^2(P)`, i.e. `P(x) T(x, y) = P(y) T(y, x)`.
    pub fn is_self_adjoint(&self, space: &FiniteSpace<S>, tol: f64) -> bool {
        let p = space.p();
        for x in 0..self.n {
            for y in (x + 1)..self.n {
                let a = p[x].clone() * self.transition(x, y).clone();
                let b = p[y].clone() * self.transition(y, x).clone();
                if S::exact() {
                    if a != b {
                        return false;
                    }
                } else if (a.to_f64() - b.to_f64()).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Matrix product `self` followed by `other`.
    pub fn compose(&self, other: &MarkovKernel<S>) -> Result<MarkovKernel<S>> {
        if self.n != other.n {
            return Err(Error::usage("composed kernels must share a state space"));
        }
        let n = self.n;
        let mut rows = vec![S::zero(); n * n];
        for x in 0..n {
            for y in 0..n {
                let t = self.transition(x, y);
                if *t == S::zero() {
                    continue;
                }
                for z in 0..n {
                    let inc = t.clone() * other.transition(y, z).clone();
                    rows[x * n + z] = rows[x * n + z].clone() + inc;
                }
            }
        }
        Ok(MarkovKernel { n, rows })
    }

    /// Convex combination `sum_i theta_i T_i` of kernels on one space.
    pub fn mixture(kernels: &[MarkovKernel<S>], theta: &[S]) -> Result<MarkovKernel<S>> {
        if kernels.is_empty() || kernels.len() != theta.len() {
            return Err(Error::usage(format!(
                "{} kernels with {} weights",
                kernels.len(),
                theta.len()
            )));
        }
        let n = kernels[0].n;
        if kernels.iter().any(|k| k.n != n) {
            return Err(Error::usage("mixture components must share a state space"));
        }
        let mut rows = vec![S::zero(); n * n];
        for (k, w) in kernels.iter().zip(theta) {
            for (acc, t) in rows.iter_mut().zip(&k.rows) {
                *acc = acc.clone() + w.clone() * t.clone();
            }
        }
        // Weight validity is the caller's contract; row sums then hold up
        // to roundoff, which from_rows would re-check. Skip the copy.
        Ok(MarkovKernel { n, rows })
    }

    pub fn to_f64(&self) -> MarkovKernel<f64> {
        MarkovKernel {
            n: self.n,
            rows: self.rows.iter().map(Scalar::to_f64).collect(),
        }
    }
}

/// Conditional-expectation kernel of the partition described by `cells`
/// (state `x` belongs to cell `cells[x]`): from `x`, resample inside the
/// cell of `x` from `P` restricted to that cell.
pub fn conditional_kernel<S: Scalar>(
    space: &FiniteSpace<S>,
    cells: &[usize],
) -> Result<MarkovKernel<S>> {
    let n = space.len();
    if cells.len() != n {
        return Err(Error::usage(format!(
            "{} cell assignments for {} states",
            cells.len(),
            n
        )));
    }
    let ncells = cells.iter().max().map_or(0, |m| m + 1);
    let mut cell_mass = vec![S::zero(); ncells];
    for (x, &c) in cells.iter().enumerate() {
        cell_mass[c] = cell_mass[c].clone() + space.p()[x].clone();
    }
    let mut rows = vec![S::zero(); n * n];
    for x in 0..n {
        let mass = &cell_mass[cells[x]];
        for y in 0..n {
            if cells[y] == cells[x] {
                rows[x * n + y] = space.p()[y].clone() / mass.clone();
            }
        }
    }
    Ok(MarkovKernel { n, rows })
}
