//! Discrete Gaussian free field layer: the finite-dimensional linear
//! algebra behind block dynamics on a centered Gaussian vector with
//! covariance `Gamma = (Id - P)^{-1}`.
//!
//! Nothing here samples the continuous field. Resampling a block `A`
//! from its conditional law is an affine map built from the matrix
//! `M_A` of [`conditional_matrix`], and the contraction analysis
//! reduces to inequalities between `P`, `Delta = Id - P`, its least
//! eigenvalue `delta`, and the Perron eigenvector `psi`. The distorted
//! metric behind the coupling argument is
//!
//! ```text
//!   dist(x, y) = sum_i psi_i |(Delta (x - y))_i|
//! ```
//!
//! and [`check_distorted_curvature`] verifies, per block and in the
//! weighted aggregate, the inequality that bounds the blockwise
//! `W_inf` contraction by `1 - delta * theta_star`.

use crate::error::{Error, Result};
use crate::models::BlockFamily;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// A validated field description: couplings `P`, Laplacian `Delta`,
/// covariance `Gamma`, spectral floor `delta_min` and Perron vector
/// `psi` (positive, max entry 1).
#[derive(Debug, Clone)]
pub struct GffInstance {
    p: DMatrix<f64>,
    delta: DMatrix<f64>,
    gamma: DMatrix<f64>,
    delta_min: f64,
    psi: Vec<f64>,
}

impl GffInstance {
    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn p_matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn delta(&self) -> &DMatrix<f64> {
        &self.delta
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn delta_min(&self) -> f64 {
        self.delta_min
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }
}

const RESIDUAL_TOL: f64 = 1e-8;

fn connected(p: &DMatrix<f64>) -> bool {
    let n = p.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if v != u && !seen[v] && p[(u, v)] > 0.0 {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Validates a coupling matrix and assembles the derived objects.
///
/// `P` must be square, entrywise nonnegative, symmetric, with row sums
/// at most one, and its off-diagonal support must connect all sites
/// (the all-zero matrix is the one degenerate case accepted, with
/// `Delta = Gamma = Id`). `Id - P` must be invertible.
pub fn build_gff(p_rows: &[Vec<f64>]) -> Result<GffInstance> {
    let n = p_rows.len();
    if n == 0 {
        return Err(Error::usage("coupling matrix is empty"));
    }
    if p_rows.iter().any(|r| r.len() != n) {
        return Err(Error::usage("coupling matrix is not square"));
    }
    let p = DMatrix::from_fn(n, n, |i, j| p_rows[i][j]);
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            let v = p[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::domain(format!("entry ({i}, {j}) = {v} is invalid")));
            }
            if (v - p[(j, i)]).abs() > 1e-12 {
                return Err(Error::domain(format!(
                    "coupling matrix is not symmetric at ({i}, {j})"
                )));
            }
            row_sum += v;
        }
        if row_sum > 1.0 + 1e-12 {
            return Err(Error::domain(format!("row {i} sums to {row_sum} > 1")));
        }
    }
    let zero = p.iter().all(|v| *v == 0.0);
    if !zero && n > 1 && !connected(&p) {
        return Err(Error::domain(
            "coupling matrix is reducible: its support does not connect all sites",
        ));
    }

    let delta = DMatrix::identity(n, n) - &p;
    let eig = SymmetricEigen::new(delta.clone());
    let mut min_idx = 0;
    for j in 1..n {
        if eig.eigenvalues[j] < eig.eigenvalues[min_idx] {
            min_idx = j;
        }
    }
    let delta_min = eig.eigenvalues[min_idx];
    if delta_min <= 1e-12 {
        return Err(Error::domain(format!(
            "Id - P is singular or indefinite: least eigenvalue {delta_min:.3e}"
        )));
    }

    let psi = if zero {
        vec![1.0; n]
    } else {
        let col = eig.eigenvectors.column(min_idx);
        let peak = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sign = if col.iter().sum::<f64>() >= 0.0 { 1.0 } else { -1.0 };
        let psi: Vec<f64> = col.iter().map(|v| sign * v / peak).collect();
        if psi.iter().any(|v| *v <= 1e-9) {
            return Err(Error::numerical(
                "Perron eigenvector is not strictly positive; the spectral floor may be degenerate",
            ));
        }
        psi
    };

    let gamma = delta.clone().try_inverse().ok_or_else(|| {
        Error::numerical("failed to invert Id - P despite a positive spectral floor")
    })?;
    let residual = (&gamma * &delta - DMatrix::<f64>::identity(n, n))
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if residual > RESIDUAL_TOL {
        return Err(Error::numerical(format!(
            "covariance inverse residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e}"
        )));
    }

    Ok(GffInstance {
        p,
        delta,
        gamma,
        delta_min,
        psi,
    })
}

fn mask_indices(mask: u32, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if n > 20 {
        return Err(Error::usage("subset masks support at most 20 sites"));
    }
    let full = (1u32 << n) - 1;
    if mask == 0 || mask & !full != 0 {
        return Err(Error::usage(format!(
            "subset mask {mask:#b} must be nonempty and within {n} sites"
        )));
    }
    let a: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
    let c: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) == 0).collect();
    Ok((a, c))
}

fn conditional_from_gamma(gamma: &DMatrix<f64>, mask: u32) -> Result<DMatrix<f64>> {
    let n = gamma.nrows();
    let (a, c) = mask_indices(mask, n)?;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for &i in &a {
        m[(i, i)] = 1.0;
    }
    if c.is_empty() {
        return Ok(m);
    }
    let gamma_cc = DMatrix::from_fn(c.len(), c.len(), |r, s| gamma[(c[r], c[s])]);
    let inv_cc = gamma_cc.clone().try_inverse().ok_or_else(|| {
        let eig = SymmetricEigen::new(gamma_cc);
        let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        Error::numerical(format!(
            "complement block of the covariance is singular (condition ~ {:.3e})",
            max / min.max(f64::MIN_POSITIVE)
        ))
    })?;
    let gamma_ac = DMatrix::from_fn(a.len(), c.len(), |r, s| gamma[(a[r], c[s])]);
    let block = -gamma_ac * inv_cc;
    for (r, &i) in a.iter().enumerate() {
        for (s, &j) in c.iter().enumerate() {
            m[(i, j)] = block[(r, s)];
        }
    }
    Ok(m)
}

/// The conditional resampling matrix `M_A` for the sites in `a_mask`:
/// identity on `A`, `-Gamma_{A,A^c} (Gamma_{A^c,A^c})^{-1}` across, zero
/// rows elsewhere. Resampling block `A` from its conditional law moves
/// `x` to `M_A z + (Id - M_A) x` with `z` a fresh field sample; `M_A` is
/// idempotent and `Delta M_A` is symmetric.
pub fn conditional_matrix(instance: &GffInstance, a_mask: u32) -> Result<DMatrix<f64>> {
    conditional_from_gamma(&instance.gamma, a_mask)
}

/// Outcome of [`check_distorted_curvature`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct CurvatureReport {
    pub samples: usize,
    /// Largest gap `lhs - rhs` of the per-block inequality over all
    /// sampled `z` and blocks; nonpositive up to roundoff.
    pub max_block_violation: f64,
    /// Largest gap of the theta-aggregated inequality against
    /// `(1 - delta * theta_star) dist`.
    pub max_aggregate_violation: f64,
    pub delta_min: f64,
    pub theta_star: f64,
}

struct CurvatureOps {
    /// `Delta (Id - M_A)` per block.
    b_mats: Vec<DMatrix<f64>>,
    /// Site indices per block.
    members: Vec<Vec<usize>>,
    theta: Vec<f64>,
    theta_star: f64,
}

fn curvature_ops(instance: &GffInstance, family: &BlockFamily<f64>) -> Result<CurvatureOps> {
    if family.n_sites() != instance.n() {
        return Err(Error::usage(format!(
            "family on {} sites for a field on {} sites",
            family.n_sites(),
            instance.n()
        )));
    }
    let n = instance.n();
    let id = DMatrix::<f64>::identity(n, n);
    let mut b_mats = Vec::with_capacity(family.blocks().len());
    let mut members = Vec::with_capacity(family.blocks().len());
    for &mask in family.blocks() {
        let m_a = conditional_matrix(instance, mask)?;
        b_mats.push(&instance.delta * (&id - &m_a));
        members.push((0..n).filter(|&i| mask & (1 << i) != 0).collect());
    }
    Ok(CurvatureOps {
        b_mats,
        members,
        theta: family.theta().weights().to_vec(),
        theta_star: family.theta_star(),
    })
}

fn violations_for(
    instance: &GffInstance,
    ops: &CurvatureOps,
    z: &DVector<f64>,
) -> (f64, f64) {
    let dz = &instance.delta * z;
    let weighted: Vec<f64> = instance
        .psi
        .iter()
        .zip(dz.iter())
        .map(|(psi, v)| psi * v.abs())
        .collect();
    let dist: f64 = weighted.iter().sum();
    let mut worst_block = f64::NEG_INFINITY;
    let mut aggregate_lhs = 0.0;
    for (k, b) in ops.b_mats.iter().enumerate() {
        let bz = b * z;
        let lhs: f64 = instance
            .psi
            .iter()
            .zip(bz.iter())
            .map(|(psi, v)| psi * v.abs())
            .sum();
        let on_block: f64 = ops.members[k].iter().map(|&i| weighted[i]).sum();
        let rhs = dist - instance.delta_min * on_block;
        worst_block = worst_block.max(lhs - rhs);
        aggregate_lhs += ops.theta[k] * lhs;
    }
    let aggregate_rhs = (1.0 - instance.delta_min * ops.theta_star) * dist;
    (worst_block, aggregate_lhs - aggregate_rhs)
}

/// Evaluates, for one displacement `z`, the largest per-block gap of
/// the distorted-metric contraction inequality and the gap of its
/// theta-aggregated form. Both are nonpositive up to roundoff for a
/// valid instance.
pub fn curvature_violation_at(
    instance: &GffInstance,
    family: &BlockFamily<f64>,
    z: &[f64],
) -> Result<(f64, f64)> {
    if z.len() != instance.n() {
        return Err(Error::usage("displacement length mismatch"));
    }
    let ops = curvature_ops(instance, family)?;
    Ok(violations_for(instance, &ops, &DVector::from_column_slice(z)))
}

/// Samples standard Gaussian displacements and records the worst gaps
/// of the per-block and aggregated contraction inequalities.
pub fn check_distorted_curvature(
    instance: &GffInstance,
    family: &BlockFamily<f64>,
    z_samples: usize,
    seed: u64,
) -> Result<CurvatureReport> {
    if z_samples == 0 {
        return Err(Error::usage("at least one sample is required"));
    }
    let ops = curvature_ops(instance, family)?;
    let n = instance.n();
    let gaps = (0..z_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed ^ (s as u64).wrapping_mul(0x9e3779b97f4a7c15));
            let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            violations_for(instance, &ops, &z)
        })
        .collect::<Vec<_>>();
    let mut report = CurvatureReport {
        samples: z_samples,
        max_block_violation: f64::NEG_INFINITY,
        max_aggregate_violation: f64::NEG_INFINITY,
        delta_min: instance.delta_min,
        theta_star: ops.theta_star,
    };
    for (block, agg) in gaps {
        report.max_block_violation = report.max_block_violation.max(block);
        report.max_aggregate_violation = report.max_aggregate_violation.max(agg);
    }
    Ok(report)
}

/// Entropy and Poincare constants of single-site uniform resampling.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GlauberConstants {
    pub kappa: f64,
    pub lambda: f64,
}

/// For uniform singleton blocks both constants equal `delta / n`.
pub fn glauber_constants(instance: &GffInstance) -> GlauberConstants {
    let v = instance.delta_min / instance.n() as f64;
    GlauberConstants { kappa: v, lambda: v }
}

/// The certified lower bound `delta * theta_star` on the entropy
/// contraction constant of block dynamics with weights `family`.
pub fn contraction_lower_bound(
    instance: &GffInstance,
    family: &BlockFamily<f64>,
) -> Result<f64> {
    if family.n_sites() != instance.n() {
        return Err(Error::usage(format!(
            "family on {} sites for a field on {} sites",
            family.n_sites(),
            instance.n()
        )));
    }
    Ok(instance.delta_min * family.theta_star())
}

/// Rayleigh quotient of the single-site Dirichlet form at the linear
/// observable `x -> x . z`, which evaluates to `z.z / (n z.Gamma z)`.
/// Minimized exactly when `z` is a least eigenvector of `Delta`.
pub fn linear_rayleigh(instance: &GffInstance, z: &[f64]) -> Result<f64> {
    if z.len() != instance.n() {
        return Err(Error::usage("test vector length mismatch"));
    }
    let zv = DVector::from_column_slice(z);
    let num = zv.dot(&zv);
    let den = zv.dot(&(&instance.gamma * &zv));
    if num == 0.0 || den <= 0.0 {
        return Err(Error::domain("test vector must be nonzero"));
    }
    Ok(num / (instance.n() as f64 * den))
}

/// Upper bound on the Poincare constant from the linear test function
/// at the Perron eigenvector: equals `delta / n` up to roundoff.
pub fn lambda_upper_linear(instance: &GffInstance) -> f64 {
    linear_rayleigh(instance, &instance.psi).expect("psi is a valid test vector")
}

/// Outcome of [`sigma_quantities`].
#[derive(Debug, Clone)]
pub struct SigmaReport {
    pub sigma_matrix: DMatrix<f64>,
    /// Least eigenvalue of the sigma matrix.
    pub sigma: f64,
    /// `1 - sqrt(1 - sigma)`: certified floor of the sandwich.
    pub kappa_low: f64,
    /// `sigma`: ceiling of the sandwich.
    pub kappa_high: f64,
}

/// Builds `Sigma = sum_A theta_A Gamma^{1/2} M_A' Gamma^{-1} M_A
/// Gamma^{1/2}` for an arbitrary positive definite covariance and
/// returns the contraction sandwich `1 - sqrt(1 - sigma) <= kappa <=
/// sigma` derived from its least eigenvalue.
pub fn sigma_quantities(
    gamma_rows: &[Vec<f64>],
    family: &BlockFamily<f64>,
) -> Result<SigmaReport> {
    let n = gamma_rows.len();
    if n == 0 || gamma_rows.iter().any(|r| r.len() != n) {
        return Err(Error::usage("covariance matrix must be square and nonempty"));
    }
    if family.n_sites() != n {
        return Err(Error::usage(format!(
            "family on {} sites for a {n}-dimensional covariance",
            family.n_sites()
        )));
    }
    let gamma = DMatrix::from_fn(n, n, |i, j| gamma_rows[i][j]);
    if (&gamma - gamma.transpose()).iter().any(|v| v.abs() > 1e-10) {
        return Err(Error::domain("covariance matrix is not symmetric"));
    }
    let eig = SymmetricEigen::new(gamma.clone());
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if min_eig <= 1e-12 * max_eig.max(1.0) {
        return Err(Error::domain(format!(
            "covariance matrix is not positive definite: least eigenvalue {min_eig:.3e}"
        )));
    }
    let q = &eig.eigenvectors;
    let sqrt_gamma = q * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * q.transpose();
    let inv_gamma = q * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l)) * q.transpose();

    let terms = family
        .blocks()
        .par_iter()
        .zip(family.theta().weights().par_iter())
        .map(|(&mask, &w)| -> Result<DMatrix<f64>> {
            let m_a = conditional_from_gamma(&gamma, mask)?;
            Ok(w * (&sqrt_gamma * m_a.transpose() * &inv_gamma * &m_a * &sqrt_gamma))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sigma_matrix = DMatrix::<f64>::zeros(n, n);
    for t in terms {
        sigma_matrix += t;
    }
    let sym = 0.5 * (&sigma_matrix + sigma_matrix.transpose());
    let sigma = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let clamped = sigma.clamp(0.0, 1.0);
    Ok(SigmaReport {
        sigma_matrix,
        sigma,
        kappa_low: 1.0 - (1.0 - clamped).sqrt(),
        kappa_high: sigma,
    })
}

/// Spectral floor of a box lattice with killed boundary.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LatticeDelta {
    /// Least eigenvalue of `Id - P` by dense eigendecomposition.
    pub delta_eigen: f64,
    /// Separable value `sum_k 2 w (1 - cos(pi / (n_k + 1)))`.
    pub delta_closed_form: f64,
}

/// Builds the nearest-neighbor walk on a `dims` box in which every hop
/// carries probability `hop_weight` and walking off the box kills the
/// chain, then returns the spectral floor both ways.
///
/// The two values agree exactly when `hop_weight = 1 / (2 d)`; the
/// closed form scales every axis term by `2 hop_weight` and is reported
/// alongside the eigenvalue rather than silently substituted for it.
pub fn lattice_delta(dims: &[usize], hop_weight: f64) -> Result<LatticeDelta> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::usage("box dimensions must be positive"));
    }
    let total: usize = dims.iter().product();
    if total > 4096 {
        return Err(Error::usage(format!("box has {total} sites, over the 4096 limit")));
    }
    let d = dims.len();
    if hop_weight <= 0.0 || !hop_weight.is_finite() || 2.0 * d as f64 * hop_weight > 1.0 + 1e-12 {
        return Err(Error::usage(format!(
            "hop weight {hop_weight} must lie in (0, 1/(2 d)] for a {d}-dimensional box"
        )));
    }

    let digits_of = |mut idx: usize| -> Vec<usize> {
        let mut digits = vec![0usize; d];
        for k in 0..d {
            digits[k] = idx % dims[k];
            idx /= dims[k];
        }
        digits
    };
    let mut p = DMatrix::<f64>::zeros(total, total);
    for idx in 0..total {
        let digits = digits_of(idx);
        let mut stride = 1usize;
        for k in 0..d {
            if digits[k] + 1 < dims[k] {
                p[(idx, idx + stride)] = hop_weight;
                p[(idx + stride, idx)] = hop_weight;
            }
            stride *= dims[k];
        }
    }
    let top = SymmetricEigen::new(p)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let closed: f64 = dims
        .iter()
        .map(|&nk| 2.0 * hop_weight * (1.0 - (std::f64::consts::PI / (nk as f64 + 1.0)).cos()))
        .sum();
    Ok(LatticeDelta {
        delta_eigen: 1.0 - top,
        delta_closed_form: closed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::BlockWeights;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn path_instance(n: usize, hop: f64) -> GffInstance {
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n - 1 {
            rows[i][i + 1] = hop;
            rows[i + 1][i] = hop;
        }
        build_gff(&rows).unwrap()
    }

    /// Random symmetric sub-stochastic connected coupling.
    #[allow(clippy::needless_range_loop)]
    fn random_instance(n: usize, seed: u64) -> GffInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let w = if j == i + 1 {
                    rng.random_range(0.2..1.0)
                } else if rng.random_bool(0.4) {
                    rng.random_range(0.0..0.5)
                } else {
                    0.0
                };
                rows[i][j] = w;
                rows[j][i] = w;
            }
        }
        let max_row: f64 = (0..n)
            .map(|i| rows[i].iter().sum::<f64>())
            .fold(0.0, f64::max);
        let scale = rng.random_range(0.6..0.95) / max_row;
        for row in &mut rows {
            for v in row.iter_mut() {
                *v *= scale;
            }
        }
        build_gff(&rows).unwrap()
    }

    #[test]
    fn zero_coupling_is_the_identity_field() {
        let inst = build_gff(&vec![vec![0.0; 5]; 5]).unwrap();
        assert_eq!(inst.delta_min(), 1.0);
        assert_eq!(inst.psi(), &[1.0; 5]);
        assert_eq!(inst.gamma(), &DMatrix::<f64>::identity(5, 5));
    }

    #[test]
    fn path_of_three_has_the_cosine_floor() {
        let inst = path_instance(3, 0.5);
        let expected = 1.0 - (std::f64::consts::PI / 4.0).cos();
        assert_abs_diff_eq!(inst.delta_min(), expected, epsilon = 1e-12);
    }

    #[test]
    fn invalid_couplings_are_rejected() {
        assert!(build_gff(&[]).is_err());
        assert!(build_gff(&[vec![0.0, 0.3], vec![0.2, 0.0]]).is_err()); // asymmetric
        assert!(build_gff(&[vec![0.0, -0.1], vec![-0.1, 0.0]]).is_err()); // negative
        assert!(build_gff(&[vec![0.0, 0.9], vec![0.9, 0.2]]).is_err()); // row sum > 1
        // Block-diagonal support: reducible.
        let block = vec![
            vec![0.0, 0.5, 0.0, 0.0],
            vec![0.5, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.5],
            vec![0.0, 0.0, 0.5, 0.0],
        ];
        assert!(build_gff(&block).is_err());
        // Doubly stochastic: Id - P singular.
        let ring = vec![
            vec![0.0, 0.5, 0.5],
            vec![0.5, 0.0, 0.5],
            vec![0.5, 0.5, 0.0],
        ];
        assert!(build_gff(&ring).is_err());
    }

    #[test]
    fn instance_invariants_on_random_couplings() {
        for seed in 0..10u64 {
            let inst = random_instance(6, seed);
            let n = inst.n();
            let residual = (inst.gamma() * inst.delta() - DMatrix::<f64>::identity(n, n))
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(residual <= 1e-8);
            let dv = inst.delta() * DVector::from_column_slice(inst.psi());
            for (lhs, psi) in dv.iter().zip(inst.psi()) {
                assert_abs_diff_eq!(*lhs, inst.delta_min() * psi, epsilon = 1e-8);
            }
            assert!(inst.psi().iter().all(|v| *v > 0.0));
            assert!(inst.psi().iter().cloned().fold(0.0f64, f64::max) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn conditional_matrix_trivial_cases() {
        let inst = random_instance(5, 3);
        let full = conditional_matrix(&inst, 0b11111).unwrap();
        assert!((full - DMatrix::<f64>::identity(5, 5)).iter().all(|v| *v == 0.0));

        let free = build_gff(&vec![vec![0.0; 4]; 4]).unwrap();
        let m = conditional_matrix(&free, 0b0101).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j && i % 2 == 0 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(m[(i, j)], expected, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn conditional_matrix_structural_identities() {
        for seed in 0..6u64 {
            let inst = random_instance(6, 100 + seed);
            let n = inst.n();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..8 {
                let mask = rng.random_range(1u32..(1 << n));
                let m = conditional_matrix(&inst, mask).unwrap();
                let idem = (&m * &m - &m).iter().fold(0.0f64, |a, v| a.max(v.abs()));
                assert!(idem <= 1e-8, "idempotency residual {idem}");
                let dm = inst.delta() * &m;
                let asym = (&dm - dm.transpose()).iter().fold(0.0f64, |a, v| a.max(v.abs()));
                assert!(asym <= 1e-8, "symmetry residual {asym}");
                let id_minus_mt = DMatrix::<f64>::identity(n, n) - m.transpose();
                assert!(id_minus_mt.iter().all(|v| *v >= -1e-10));
                let mg = &m * inst.gamma();
                for i in 0..n {
                    let in_a_row = mask & (1 << i) != 0;
                    for j in 0..n {
                        let in_a_col = mask & (1 << j) != 0;
                        if !in_a_row {
                            assert_abs_diff_eq!(m[(i, j)], 0.0, epsilon = 1e-12);
                        }
                        if in_a_row && !in_a_col {
                            assert_abs_diff_eq!(mg[(i, j)], 0.0, epsilon = 1e-8);
                        }
                    }
                }
                // Perron comparison on the block.
                let mpsi = &m * DVector::from_column_slice(inst.psi());
                for i in 0..n {
                    if mask & (1 << i) != 0 {
                        assert!(
                            mpsi[i] >= inst.delta_min() * inst.psi()[i] - 1e-8,
                            "site {i}: {} < delta psi {}",
                            mpsi[i],
                            inst.delta_min() * inst.psi()[i]
                        );
                    } else {
                        assert_abs_diff_eq!(mpsi[i], 0.0, epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn neumann_series_reaches_the_block_inverse() {
        let inst = random_instance(6, 17);
        let mask = 0b010111u32;
        let (a, _) = mask_indices(mask, 6).unwrap();
        let k = a.len();
        let p_aa = DMatrix::from_fn(k, k, |r, s| inst.p_matrix()[(a[r], a[s])]);
        let d_aa = DMatrix::<f64>::identity(k, k) - &p_aa;
        let inv = d_aa.try_inverse().unwrap();
        let radius = SymmetricEigen::new(p_aa.clone())
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(radius < 1.0);
        let steps = ((1e-7 * (1.0 - radius)).ln() / radius.ln()).ceil() as usize;
        let mut sum = DMatrix::<f64>::identity(k, k);
        let mut power = DMatrix::<f64>::identity(k, k);
        for _ in 0..steps {
            power = &power * &p_aa;
            sum += &power;
        }
        let gap = (&sum - &inv).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(gap <= 1e-6, "truncated series off by {gap} after {steps} terms");
    }

    #[test]
    fn curvature_holds_per_block_and_aggregated() {
        let inst = random_instance(6, 23);
        let family: BlockFamily<f64> = BlockFamily::singletons(6).unwrap();
        let report = check_distorted_curvature(&inst, &family, 500, 11).unwrap();
        assert!(report.max_block_violation <= 1e-9, "{}", report.max_block_violation);
        assert!(
            report.max_aggregate_violation <= 1e-9,
            "{}",
            report.max_aggregate_violation
        );

        let pairs: BlockFamily<f64> = BlockFamily::site_pairs(6).unwrap();
        let report = check_distorted_curvature(&inst, &pairs, 300, 5).unwrap();
        assert!(report.max_block_violation <= 1e-9);
        assert!(report.max_aggregate_violation <= 1e-9);
    }

    #[test]
    fn curvature_structured_displacements() {
        let inst = random_instance(5, 41);
        let family: BlockFamily<f64> = BlockFamily::singletons(5).unwrap();
        let (block, agg) = curvature_violation_at(&inst, &family, &[0.0; 5]).unwrap();
        assert!(block <= 1e-15 && agg <= 1e-15);

        // The full block resamples everything: the left side vanishes.
        let full: BlockFamily<f64> =
            BlockFamily::new(5, vec![0b11111], BlockWeights::uniform(1).unwrap()).unwrap();
        let z = [0.7, -1.1, 0.3, 2.0, -0.4];
        let (gap, _) = curvature_violation_at(&inst, &full, &z).unwrap();
        let dz = inst.delta() * DVector::from_column_slice(&z);
        let dist: f64 = inst
            .psi()
            .iter()
            .zip(dz.iter())
            .map(|(psi, v)| psi * v.abs())
            .sum();
        // gap = 0 - (1 - delta) dist.
        assert_abs_diff_eq!(gap, -(1.0 - inst.delta_min()) * dist, epsilon = 1e-10);
        assert!(inst.delta_min() <= 1.0 + 1e-12);
    }

    #[test]
    fn glauber_and_linear_bound_agree() {
        let free = build_gff(&vec![vec![0.0; 5]; 5]).unwrap();
        let g = glauber_constants(&free);
        assert_abs_diff_eq!(g.kappa, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(lambda_upper_linear(&free), 0.2, epsilon = 1e-12);

        let path = path_instance(3, 0.5);
        let expected = (1.0 - (std::f64::consts::PI / 4.0).cos()) / 3.0;
        assert_abs_diff_eq!(glauber_constants(&path).kappa, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(lambda_upper_linear(&path), expected, epsilon = 1e-9);

        // Uniform singletons: the general lower bound collapses to the
        // Glauber value.
        let family: BlockFamily<f64> = BlockFamily::singletons(3).unwrap();
        assert_abs_diff_eq!(
            contraction_lower_bound(&path, &family).unwrap(),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn rayleigh_quotient_grows_off_the_eigenvector() {
        let inst = random_instance(6, 51);
        let floor = lambda_upper_linear(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let z: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = linear_rayleigh(&inst, &z).unwrap();
            assert!(r >= floor - 1e-12);
        }
        let bumped: Vec<f64> = inst
            .psi()
            .iter()
            .enumerate()
            .map(|(i, v)| if i == 0 { v + 0.5 } else { *v })
            .collect();
        assert!(linear_rayleigh(&inst, &bumped).unwrap() > floor + 1e-9);
    }

    #[test]
    fn sigma_for_identity_covariance_and_full_block() {
        let id3 = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let singles: BlockFamily<f64> = BlockFamily::singletons(3).unwrap();
        let report = sigma_quantities(&id3, &singles).unwrap();
        assert_abs_diff_eq!(report.sigma, 1.0 / 3.0, epsilon = 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 / 3.0 } else { 0.0 };
                assert_abs_diff_eq!(report.sigma_matrix[(i, j)], expected, epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(report.kappa_low, 1.0 - (2.0f64 / 3.0).sqrt(), epsilon = 1e-12);

        let full: BlockFamily<f64> =
            BlockFamily::new(3, vec![0b111], BlockWeights::uniform(1).unwrap()).unwrap();
        let report = sigma_quantities(&id3, &full).unwrap();
        assert_abs_diff_eq!(report.sigma, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.kappa_high, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sigma_sandwich_orders_on_random_covariances() {
        for seed in 0..5u64 {
            let inst = random_instance(5, 200 + seed);
            let gamma_rows: Vec<Vec<f64>> = (0..5)
                .map(|i| (0..5).map(|j| inst.gamma()[(i, j)]).collect())
                .collect();
            let family: BlockFamily<f64> = BlockFamily::site_pairs(5).unwrap();
            let report = sigma_quantities(&gamma_rows, &family).unwrap();
            assert!(report.kappa_low <= report.kappa_high + 1e-12);
            assert!(report.sigma >= -1e-10);
        }
        let bad = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        let fam: BlockFamily<f64> = BlockFamily::singletons(2).unwrap();
        assert!(sigma_quantities(&bad, &fam).is_err());
    }

    #[test]
    fn lattice_floor_matches_the_separable_form_at_the_balanced_weight() {
        let single = lattice_delta(&[1], 0.5).unwrap();
        assert_abs_diff_eq!(single.delta_eigen, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(single.delta_closed_form, 1.0, epsilon = 1e-12);

        let path = lattice_delta(&[3], 0.5).unwrap();
        let expected = 1.0 - (std::f64::consts::PI / 4.0).cos();
        assert_abs_diff_eq!(path.delta_eigen, expected, epsilon = 1e-10);
        assert_abs_diff_eq!(path.delta_closed_form, expected, epsilon = 1e-12);

        let square = lattice_delta(&[3, 3], 0.25).unwrap();
        assert_abs_diff_eq!(square.delta_eigen, expected, epsilon = 1e-10);
        assert_abs_diff_eq!(square.delta_closed_form, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(square.delta_eigen, square.delta_closed_form, epsilon = 1e-10);

        let box3 = lattice_delta(&[2, 3, 4], 1.0 / 6.0).unwrap();
        assert_abs_diff_eq!(box3.delta_eigen, box3.delta_closed_form, epsilon = 1e-10);

        // Off the balanced weight the two conventions differ.
        let skew = lattice_delta(&[3, 3], 0.2).unwrap();
        assert!((skew.delta_eigen - skew.delta_closed_form).abs() > 1e-3);

        assert!(lattice_delta(&[3, 3], 0.3).is_err());
        assert!(lattice_delta(&[0], 0.5).is_err());
        assert!(lattice_delta(&[100, 100], 0.25).is_err());
    }
}
