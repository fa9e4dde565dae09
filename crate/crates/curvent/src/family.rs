//! Normalized weight vectors over a family of kernels.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::space::NORMALIZATION_TOL;

/// Weights `theta_i >= 0` with `sum_i theta_i = 1`, aligned with a list
/// of kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights<S: Scalar = f64> {
    weights: Vec<S>,
}

impl<S: Scalar> BlockWeights<S> {
    pub fn new(weights: Vec<S>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("weight vector must be nonempty"));
        }
        if weights.iter().any(|w| *w < S::zero()) {
            return Err(Error::domain("weights must be nonnegative"));
        }
        let sum = weights.iter().fold(S::zero(), |a, b| a + b.clone());
        let ok = if S::exact() {
            sum == S::one()
        } else {
            (sum.to_f64() - 1.0).abs() <= NORMALIZATION_TOL
        };
        if !ok {
            return Err(Error::domain(format!("weights sum to {sum}, not 1")));
        }
        Ok(BlockWeights { weights })
    }

    /// Exact normalization of nonnegative integer masses.
    pub fn from_integers(masses: &[i64]) -> Result<Self> {
        if masses.iter().any(|&m| m < 0) {
            return Err(Error::domain("weights must be nonnegative"));
        }
        let total: i64 = masses.iter().sum();
        if total <= 0 {
            return Err(Error::domain("weight masses must not all vanish"));
        }
        Self::new(masses.iter().map(|&m| S::from_ratio(m, total)).collect())
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("weight vector must be nonempty"));
        }
        Self::new(vec![S::from_ratio(1, m as i64); m])
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn to_f64(&self) -> BlockWeights<f64> {
        BlockWeights {
            weights: self.weights.iter().map(Scalar::to_f64).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rat;

    #[test]
    fn validates_normalization() {
        assert!(BlockWeights::new(vec![0.5, 0.5]).is_ok());
        assert!(BlockWeights::new(vec![0.5, 0.6]).is_err());
        assert!(BlockWeights::new(vec![1.5, -0.5]).is_err());
        assert!(BlockWeights::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn integer_masses_normalize_exactly() {
        let w: BlockWeights<Rat> = BlockWeights::from_integers(&[3, 1, 4]).unwrap();
        assert_eq!(w.weights()[0], Rat::from_ratio(3, 8));
        assert_eq!(w.weights()[2], Rat::from_ratio(1, 2));
        assert!(BlockWeights::<Rat>::from_integers(&[0, 0]).is_err());
    }
}
