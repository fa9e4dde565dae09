//! Finite probability spaces, densities and entropy.
//!
//! Entropy here is always relative to the reference measure `P` of the
//! space:
//!
//! ```text
//!   Ent(f) = E[f log f] - E[f] log E[f],      0 log 0 = 0.
//! ```
//!
//! It is computed through the equivalent form
//! `Ent(f) = E[f] * E[phi(f / E[f])]` with `phi(u) = u log u - u + 1`,
//! which is a sum of nonnegative terms. That removes the cancellation
//! between the two raw terms, so near-constant densities (the regime the
//! ascent in [`crate::estimate`] probes) come out with full precision and
//! the result is nonnegative by construction, not by luck.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// Relative slack allowed when checking that float data is normalized.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// A finite state space with labels and a fully supported reference
/// probability measure.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSpace<S: Scalar = f64> {
    labels: Vec<String>,
    p: Vec<S>,
}

impl<S: Scalar> FiniteSpace<S> {
    /// Builds a space from a strictly positive probability vector.
    ///
    /// Exact scalars must sum to one on the nose; floats within
    /// [`NORMALIZATION_TOL`].
    pub fn new(p: Vec<S>) -> Result<Self> {
        let labels = (0..p.len()).map(|i| i.to_string()).collect();
        Self::with_labels(labels, p)
    }

    pub fn with_labels(labels: Vec<String>, p: Vec<S>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::domain("state space must be nonempty"));
        }
        if labels.len() != p.len() {
            return Err(Error::usage(format!(
                "{} labels for {} states",
                labels.len(),
                p.len()
            )));
        }
        if p.iter().any(|x| *x <= S::zero()) {
            return Err(Error::domain(
                "reference measure must be strictly positive; restrict to the support first",
            ));
        }
        let sum = p.iter().fold(S::zero(), |a, b| a + b.clone());
        let ok = if S::exact() {
            sum == S::one()
        } else {
            (sum.to_f64() - 1.0).abs() <= NORMALIZATION_TOL
        };
        if !ok {
            return Err(Error::domain(format!(
                "reference measure sums to {sum}, not 1"
            )));
        }
        Ok(FiniteSpace { labels, p })
    }

    /// Uniform measure on `n` states.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("state space must be nonempty"));
        }
        Self::new(vec![S::from_ratio(1, n as i64); n])
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn p(&self) -> &[S] {
        &self.p
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    /// `E[f]` with respect to the reference measure.
    pub fn expectation(&self, f: &[S]) -> S {
        debug_assert_eq!(f.len(), self.len());
        self.p
            .iter()
            .zip(f)
            .fold(S::zero(), |acc, (p, v)| acc + p.clone() * v.clone())
    }

    pub fn to_f64(&self) -> FiniteSpace<f64> {
        FiniteSpace {
            labels: self.labels.clone(),
            p: self.p.iter().map(Scalar::to_f64).collect(),
        }
    }
}

/// A nonnegative function on a [`FiniteSpace`], the argument of entropy
/// and of the kernel operations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density<S: Scalar = f64> {
    values: Vec<S>,
}

impl<S: Scalar> Density<S> {
    pub fn new(values: Vec<S>) -> Result<Self> {
        if values.iter().any(|v| *v < S::zero()) {
            return Err(Error::domain("density has a negative entry"));
        }
        Ok(Density { values })
    }

    /// Indicator of a single state.
    pub fn indicator(n: usize, state: usize) -> Result<Self> {
        if state >= n {
            return Err(Error::usage(format!("state {state} out of range {n}")));
        }
        let mut values = vec![S::zero(); n];
        values[state] = S::one();
        Density::new(values)
    }

    pub fn constant(n: usize, value: S) -> Result<Self> {
        Density::new(vec![value; n])
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `u log u - u + 1`, evaluated through its series near `u = 1` where the
/// direct formula cancels.
pub(crate) fn phi(u: f64) -> f64 {
    debug_assert!(u >= 0.0);
    let w = u - 1.0;
    if w.abs() < 1e-3 {
        // w^2/2 - w^3/6 + w^4/12 - w^5/20 + O(w^6)
        w * w * (0.5 + w * (-1.0 / 6.0 + w * (1.0 / 12.0 - w * 0.05)))
    } else if u == 0.0 {
        1.0
    } else {
        u * u.ln() - u + 1.0
    }
}

/// Relative entropy `Ent(f) = E[f log f] - E[f] log E[f]` of a density
/// with respect to the space's reference measure.
///
/// Returns exactly zero for constant densities (including the zero
/// density) and is nonnegative for every input.
pub fn entropy(space: &FiniteSpace<f64>, f: &Density<f64>) -> Result<f64> {
    if f.len() != space.len() {
        return Err(Error::usage(format!(
            "density has {} entries on a {}-state space",
            f.len(),
            space.len()
        )));
    }
    // Constant densities have zero entropy identically; returning early
    // keeps that exact instead of leaving roundoff from the mean.
    if f.values().windows(2).all(|w| w[0] == w[1]) {
        return Ok(0.0);
    }
    let mean = space.expectation(f.values());
    if mean <= 0.0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for (p, v) in space.p().iter().zip(f.values()) {
        acc += p * phi(v / mean);
    }
    Ok(mean * acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rat;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_malformed_spaces() {
        assert!(FiniteSpace::<f64>::new(vec![]).is_err());
        assert!(FiniteSpace::new(vec![0.5, 0.0, 0.5]).is_err());
        assert!(FiniteSpace::new(vec![0.5, 0.6]).is_err());
        assert!(FiniteSpace::<Rat>::new(vec![
            Rat::from_ratio(1, 3),
            Rat::from_ratio(1, 3),
        ])
        .is_err());
    }

    #[test]
    fn entropy_of_constant_density_is_exactly_zero() {
        let space = FiniteSpace::uniform(5).unwrap();
        let f = Density::constant(5, 3.7).unwrap();
        assert_eq!(entropy(&space, &f).unwrap(), 0.0);
        let zero = Density::constant(5, 0.0).unwrap();
        assert_eq!(entropy(&space, &zero).unwrap(), 0.0);
    }

    #[test]
    fn entropy_of_two_point_half_density() {
        // P uniform on two points, f = (2, 0): Ent = log 2.
        let space = FiniteSpace::uniform(2).unwrap();
        let f = Density::new(vec![2.0, 0.0]).unwrap();
        assert_abs_diff_eq!(
            entropy(&space, &f).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn entropy_of_normalized_indicator_is_log_m() {
        for m in [2usize, 3, 7, 24] {
            let space = FiniteSpace::uniform(m).unwrap();
            let f = Density::new(
                (0..m).map(|i| if i == 0 { m as f64 } else { 0.0 }).collect(),
            )
            .unwrap();
            assert_abs_diff_eq!(
                entropy(&space, &f).unwrap(),
                (m as f64).ln(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn entropy_is_scale_equivariant_and_nonnegative() {
        let space = FiniteSpace::new(vec![0.2, 0.3, 0.5]).unwrap();
        let f = Density::new(vec![0.1, 2.0, 0.7]).unwrap();
        let e = entropy(&space, &f).unwrap();
        assert!(e >= 0.0);
        // Ent(c f) = c Ent(f)
        let cf = Density::new(f.values().iter().map(|v| 11.0 * v).collect()).unwrap();
        assert_abs_diff_eq!(entropy(&space, &cf).unwrap(), 11.0 * e, epsilon = 1e-12);
    }

    #[test]
    fn entropy_near_constant_does_not_cancel() {
        // Ent(1 + eps g) ~ eps^2/2 Var(g); the straightforward two-term
        // formula loses everything here.
        let space = FiniteSpace::uniform(4).unwrap();
        let eps = 1e-9;
        let g = [1.0, -1.0, 1.0, -1.0];
        let f = Density::new(g.iter().map(|v| 1.0 + eps * v).collect()).unwrap();
        let e = entropy(&space, &f).unwrap();
        let expected = eps * eps / 2.0;
        assert!((e - expected).abs() < 1e-6 * expected, "Ent = {e:e}");
    }

    #[test]
    fn negative_density_is_rejected() {
        assert!(Density::new(vec![0.5, -0.1]).is_err());
    }

    #[test]
    fn expectation_is_exact_over_rationals() {
        let space = FiniteSpace::<Rat>::uniform(4).unwrap();
        let f: Vec<Rat> = (1..=4).map(Rat::from_int).collect();
        assert_eq!(space.expectation(&f), Rat::from_ratio(5, 2));
    }
}
