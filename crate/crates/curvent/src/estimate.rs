//! Upper-bound counterpart to the certificate: estimates the worst-case
//! entropy contraction ratio
//!
//! ```text
//!   rho = sup_g  sum_i theta_i Ent(T_i* g) / Ent(g)
//! ```
//!
//! over nonconstant densities `g`, together with the spectral variance
//! bound. Any ratio value actually attained is a lower bound on `rho`,
//! so `1 - rho_est` upper-bounds every valid contraction constant and
//! brackets the certified `kappa` from above.
//!
//! The search runs projected gradient ascent on log-densities and, in
//! parallel, a fixed-point iteration of the nonlinear operator
//! `Lambda f = sum_i theta_i T_i log T_i* exp f`, keeping the best ratio
//! seen anywhere. No optimality is claimed.

use crate::error::{Error, Result};
use crate::family::BlockWeights;
use crate::kernel::MarkovKernel;
use crate::metric::Metric;
use crate::space::{entropy, Density, FiniteSpace};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;

/// Search parameters for [`estimate_rho`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AscentConfig {
    /// Total number of starts, structured seeds included.
    pub restarts: usize,
    /// Iteration cap per start, for both search methods.
    pub max_iters: usize,
    /// Initial ascent step, adapted by backtracking.
    pub step: f64,
    /// Stop once an accepted step improves the ratio by less than this.
    pub tol: f64,
    /// Seed for the random starts.
    pub seed: u64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        AscentConfig {
            restarts: 16,
            max_iters: 300,
            step: 0.5,
            tol: 1e-11,
            seed: 0x5eed,
        }
    }
}

/// Outcome of [`estimate_rho`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct EstimateReport {
    /// Best entropy-contraction ratio found, recomputed from the witness.
    pub rho_est: f64,
    /// Density attaining `rho_est`, normalized to unit mean.
    pub witness_f: Density<f64>,
    /// Second-largest eigenvalue of `sum_i theta_i T_i T_i*`.
    pub spectral_factor: f64,
    /// Total iterations spent across all starts and both methods.
    pub iterations: usize,
    /// Whether the start that produced `rho_est` stopped by tolerance
    /// rather than by the iteration cap.
    pub converged: bool,
}

/// Box half-width for log-densities: the search stays inside densities
/// `exp(h)` with `|h| <= CLAMP` after centering.
const CLAMP: f64 = 10.0;

fn validate_family(
    space: &FiniteSpace<f64>,
    kernels: &[MarkovKernel<f64>],
    theta: &BlockWeights<f64>,
) -> Result<()> {
    if kernels.is_empty() {
        return Err(Error::usage("at least one kernel is required"));
    }
    if kernels.len() != theta.len() {
        return Err(Error::usage(format!(
            "{} kernels with {} weights",
            kernels.len(),
            theta.len()
        )));
    }
    if let Some(k) = kernels.iter().find(|k| k.len() != space.len()) {
        return Err(Error::usage(format!(
            "kernel on {} states, space has {}",
            k.len(),
            space.len()
        )));
    }
    Ok(())
}

/// Precomputed adjoints shared across ratio evaluations.
struct Ensemble<'a> {
    space: &'a FiniteSpace<f64>,
    kernels: &'a [MarkovKernel<f64>],
    adjoints: Vec<MarkovKernel<f64>>,
    theta: &'a [f64],
}

impl<'a> Ensemble<'a> {
    fn new(
        space: &'a FiniteSpace<f64>,
        kernels: &'a [MarkovKernel<f64>],
        theta: &'a BlockWeights<f64>,
    ) -> Result<Self> {
        validate_family(space, kernels, theta)?;
        let adjoints = kernels
            .iter()
            .map(|k| k.adjoint(space))
            .collect::<Result<Vec<_>>>()?;
        Ok(Ensemble {
            space,
            kernels,
            adjoints,
            theta: theta.weights(),
        })
    }

    /// `log sum_y K(x, y) exp(f_y)` for every `x`, max-subtracted per row.
    fn log_apply_exp(kernel: &MarkovKernel<f64>, f: &[f64]) -> Vec<f64> {
        let n = kernel.len();
        (0..n)
            .map(|x| {
                let row = kernel.row(x);
                let m = row
                    .iter()
                    .zip(f)
                    .filter(|(k, _)| **k > 0.0)
                    .map(|(_, v)| *v)
                    .fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = row
                    .iter()
                    .zip(f)
                    .filter(|(k, _)| **k > 0.0)
                    .map(|(k, v)| k * (v - m).exp())
                    .sum();
                m + s.ln()
            })
            .collect()
    }

    fn log_mean_exp(&self, h: &[f64]) -> f64 {
        let m = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = self
            .space
            .p()
            .iter()
            .zip(h)
            .map(|(p, v)| p * (v - m).exp())
            .sum();
        m + s.ln()
    }

    fn lambda(&self, f: &[f64]) -> Vec<f64> {
        let n = self.space.len();
        let mut out = vec![0.0; n];
        for (i, adj) in self.adjoints.iter().enumerate() {
            let log_v = Self::log_apply_exp(adj, f);
            let pushed = self.kernels[i].apply(&log_v);
            for (o, v) in out.iter_mut().zip(pushed) {
                *o += self.theta[i] * v;
            }
        }
        out
    }

    /// Ratio `sum_i theta_i Ent(T_i* g) / Ent(g)`, `None` when `Ent(g)`
    /// vanishes.
    fn ratio_of_density(&self, g: &[f64]) -> Result<Option<f64>> {
        let g = Density::new(g.to_vec())?;
        let denom = entropy(self.space, &g)?;
        if denom <= 0.0 {
            return Ok(None);
        }
        let mut num = 0.0;
        for (i, adj) in self.adjoints.iter().enumerate() {
            if self.theta[i] == 0.0 {
                continue;
            }
            let pulled = Density::new(adj.apply(g.values()))?;
            num += self.theta[i] * entropy(self.space, &pulled)?;
        }
        Ok(Some((num / denom).clamp(0.0, 1.0)))
    }

    fn ratio_of_log(&self, h: &[f64]) -> Result<Option<f64>> {
        let g: Vec<f64> = h.iter().map(|v| v.exp()).collect();
        self.ratio_of_density(&g)
    }

    /// Analytic gradient of the log-density ratio `h -> ratio(exp h)`,
    /// together with the ratio itself. `None` on constant `h`.
    fn ratio_and_grad(&self, h: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
        let n = self.space.len();
        let g: Vec<f64> = h.iter().map(|v| v.exp()).collect();
        let gd = Density::new(g.clone())?;
        let denom = entropy(self.space, &gd)?;
        if denom <= 0.0 {
            return Ok(None);
        }
        let log_z = self.log_mean_exp(h);
        let mut num = 0.0;
        // lambda_centered(x) = (Lambda h)(x) - log E[exp h].
        let mut lambda_centered = vec![0.0; n];
        for (i, adj) in self.adjoints.iter().enumerate() {
            let log_v = Self::log_apply_exp(adj, h);
            let v: Vec<f64> = log_v.iter().map(|lv| lv.exp()).collect();
            num += self.theta[i] * entropy(self.space, &Density::new(v)?)?;
            let centered: Vec<f64> = log_v.iter().map(|lv| lv - log_z).collect();
            let pushed = self.kernels[i].apply(&centered);
            for (acc, v) in lambda_centered.iter_mut().zip(pushed) {
                *acc += self.theta[i] * v;
            }
        }
        let ratio = (num / denom).clamp(0.0, 1.0);
        let grad: Vec<f64> = (0..n)
            .map(|x| {
                let weight = self.space.p()[x] * g[x];
                weight * (denom * lambda_centered[x] - num * (h[x] - log_z)) / (denom * denom)
            })
            .collect();
        Ok(Some((ratio, grad)))
    }

    fn center(&self, h: &mut [f64]) {
        let mean = self.space.expectation(h);
        for v in h.iter_mut() {
            *v = (*v - mean).clamp(-CLAMP, CLAMP);
        }
    }
}

/// The nonlinear operator `Lambda f = sum_i theta_i T_i log T_i* exp f`,
/// evaluated with per-row max subtraction so large `f` cannot overflow.
///
/// Markov operators fix constants, so `Lambda` maps constants to
/// themselves; its linearization at zero is `sum_i theta_i T_i T_i*`.
pub fn lambda_op(
    space: &FiniteSpace<f64>,
    kernels: &[MarkovKernel<f64>],
    theta: &BlockWeights<f64>,
    f: &[f64],
) -> Result<Vec<f64>> {
    let ens = Ensemble::new(space, kernels, theta)?;
    if f.len() != space.len() {
        return Err(Error::usage(format!(
            "function has {} entries on a {}-state space",
            f.len(),
            space.len()
        )));
    }
    Ok(ens.lambda(f))
}

/// The entropy contraction ratio `sum_i theta_i Ent(T_i* g) / Ent(g)` of
/// a nonconstant density `g`, clamped to `[0, 1]`.
pub fn entropy_ratio(
    space: &FiniteSpace<f64>,
    kernels: &[MarkovKernel<f64>],
    theta: &BlockWeights<f64>,
    g: &Density<f64>,
) -> Result<f64> {
    let ens = Ensemble::new(space, kernels, theta)?;
    if g.len() != space.len() {
        return Err(Error::usage(format!(
            "density has {} entries on a {}-state space",
            g.len(),
            space.len()
        )));
    }
    ens.ratio_of_density(g.values())?
        .ok_or_else(|| Error::domain("entropy ratio is undefined for constant densities"))
}

/// Largest eigenvalue of `sum_i theta_i T_i T_i*` on the mean-zero
/// subspace, via eigendecomposition of the similarity-symmetrized matrix
/// in the stationarity-weighted inner product. Clamped to `[0, 1]`.
pub fn variance_contraction_spectral(
    space: &FiniteSpace<f64>,
    kernels: &[MarkovKernel<f64>],
    theta: &BlockWeights<f64>,
) -> Result<f64> {
    let eigs = spectrum(space, kernels, theta)?;
    Ok(eigs.get(1).map_or(0.0, |l| l.clamp(0.0, 1.0)))
}

/// All eigenvalues of `sum_i theta_i T_i T_i*`, descending.
fn spectrum(
    space: &FiniteSpace<f64>,
    kernels: &[MarkovKernel<f64>],
    theta: &BlockWeights<f64>,
) -> Result<Vec<f64>> {
    let ens = Ensemble::new(space, kernels, theta)?;
    let sym = symmetrized_operator(&ens);
    let mut eigs: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().cloned().collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    Ok(eigs)
}

fn symmetrized_operator(ens: &Ensemble) -> DMatrix<f64> {
    let n = ens.space.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (i, k) in ens.kernels.iter().enumerate() {
        let prod = k.compose(&ens.adjoints[i]).expect("same state space");
        for x in 0..n {
            for y in 0..n {
                a[(x, y)] += ens.theta[i] * prod.transition(x, y);
            }
        }
    }
    let p = ens.space.p();
    let mut sym = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            sym[(x, y)] = (p[x] / p[y]).sqrt() * a[(x, y)];
        }
    }
    // The operator is self-adjoint, so asymmetry here is pure roundoff.
    for x in 0..n {
        for y in (x + 1)..n {
            let v = 0.5 * (sym[(x, y)] + sym[(y, x)]);
            sym[(x, y)] = v;
            sym[(y, x)] = v;
        }
    }
    sym
}

/// Top eigenvector of the symmetrized operator restricted to mean-zero
/// functions, mapped back to function coordinates and sup-normalized.
fn top_meanzero_direction(ens: &Ensemble) -> Option<Vec<f64>> {
    let n = ens.space.len();
    let sym = symmetrized_operator(ens);
    let eig = SymmetricEigen::new(sym);
    let p = ens.space.p();
    // In symmetrized coordinates the constant function is sqrt(p); pick
    // the largest eigenvalue among eigenvectors not aligned with it.
    let sqrt_p: Vec<f64> = p.iter().map(|v| v.sqrt()).collect();
    let mut best: Option<(f64, usize)> = None;
    for j in 0..n {
        let col = eig.eigenvectors.column(j);
        let align: f64 = col.iter().zip(&sqrt_p).map(|(a, b)| a * b).sum();
        if align.abs() > 0.99 {
            continue;
        }
        let l = eig.eigenvalues[j];
        if best.is_none_or(|(bl, _)| l > bl) {
            best = Some((l, j));
        }
    }
    let (_, j) = best?;
    let col = eig.eigenvectors.column(j);
    // Undo the similarity transform and project out the constant part.
    let mut f: Vec<f64> = col.iter().zip(&sqrt_p).map(|(v, s)| v / s).collect();
    let mean = ens.space.expectation(&f);
    for v in f.iter_mut() {
        *v -= mean;
    }
    let sup = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sup < 1e-300 {
        return None;
    }
    for v in f.iter_mut() {
        *v /= sup;
    }
    Some(f)
}

struct StartOutcome {
    ratio: f64,
    h: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn ascend(ens: &Ensemble, seed_h: &[f64], config: &AscentConfig) -> Result<StartOutcome> {
    let mut h = seed_h.to_vec();
    ens.center(&mut h);
    let mut best_h = h.clone();
    let Some((mut ratio, mut grad)) = ens.ratio_and_grad(&h)? else {
        return Ok(StartOutcome {
            ratio: 0.0,
            h,
            iterations: 0,
            converged: true,
        });
    };
    let mut best_ratio = ratio;
    let mut step = config.step;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..config.max_iters {
        iterations += 1;
        let gnorm = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gnorm < 1e-15 {
            converged = true;
            break;
        }
        let mut accepted = None;
        let mut trial_step = step;
        for _ in 0..40 {
            let mut h_trial: Vec<f64> = h
                .iter()
                .zip(&grad)
                .map(|(v, g)| v + trial_step * g / gnorm)
                .collect();
            ens.center(&mut h_trial);
            if let Some((r_trial, g_trial)) = ens.ratio_and_grad(&h_trial)? {
                if r_trial > ratio {
                    accepted = Some((r_trial, h_trial, g_trial));
                    break;
                }
            }
            trial_step *= 0.5;
        }
        let Some((r_new, h_new, g_new)) = accepted else {
            converged = true;
            break;
        };
        let gain = r_new - ratio;
        h = h_new;
        ratio = r_new;
        grad = g_new;
        step = (trial_step * 2.0).min(config.step * 8.0);
        if ratio > best_ratio {
            best_ratio = ratio;
            best_h = h.clone();
        }
        if gain < config.tol {
            converged = true;
            break;
        }
    }
    Ok(StartOutcome {
        ratio: best_ratio,
        h: best_h,
        iterations,
        converged,
    })
}

fn lambda_iterate(ens: &Ensemble, seed_h: &[f64], config: &AscentConfig) -> Result<StartOutcome> {
    let mut f = seed_h.to_vec();
    ens.center(&mut f);
    let mut best_ratio = 0.0;
    let mut best_h = f.clone();
    let mut iterations = 0;
    let mut converged = false;
    let mut stale = 0usize;
    for _ in 0..config.max_iters {
        iterations += 1;
        if let Some(r) = ens.ratio_of_log(&f)? {
            if r > best_ratio + config.tol {
                best_ratio = r;
                best_h = f.clone();
                stale = 0;
            } else {
                stale += 1;
            }
        }
        let mut next = ens.lambda(&f);
        let mean = ens.space.expectation(&next);
        let mut range = 0.0f64;
        for v in next.iter_mut() {
            *v -= mean;
            range = range.max(v.abs());
        }
        if range < 1e-13 {
            converged = true;
            break;
        }
        // The fixed-point equation is shift and scale covariant, so each
        // iterate is renormalized to a fixed sup-norm.
        for v in next.iter_mut() {
            *v *= 2.0 / range;
        }
        f = next;
        if stale >= 8 {
            converged = true;
            break;
        }
    }
    Ok(StartOutcome {
        ratio: best_ratio,
        h: best_h,
        iterations,
        converged,
    })
}

/// Builds the list of starting log-densities: eigenvector perturbations
/// at several scales and both signs, near-indicator spikes, and random
/// Gaussian fills up to `config.restarts`.
fn seed_list(ens: &Ensemble, config: &AscentConfig) -> Vec<Vec<f64>> {
    let n = ens.space.len();
    let mut seeds: Vec<Vec<f64>> = Vec::new();
    if let Some(dir) = top_meanzero_direction(ens) {
        for eps in [1e-2, 1e-4, 1e-7] {
            for sign in [1.0, -1.0] {
                seeds.push(dir.iter().map(|v| sign * eps * v).collect());
            }
        }
    }
    let p = ens.space.p();
    let argmax = (0..n).max_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap()).unwrap();
    let argmin = (0..n).min_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap()).unwrap();
    let mut spikes = vec![0usize, argmax, argmin];
    spikes.dedup();
    for x in spikes {
        let mut h = vec![0.0; n];
        h[x] = 6.0;
        seeds.push(h);
    }
    let normal = Normal::new(0.0, 1.5).expect("valid parameters");
    let mut index = 0u64;
    while seeds.len() < config.restarts.max(seeds.len()) {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(index));
        index += 1;
        seeds.push((0..n).map(|_| normal.sample(&mut rng)).collect());
    }
    seeds
}

/// Searches for the worst entropy-contraction ratio of the family.
///
/// Every start runs both gradient ascent and the fixed-point iteration;
/// the reported `rho_est` is recomputed from the best witness found, so
/// it is always an attained ratio and hence a lower bound on the true
/// supremum. Starts run in parallel with per-start generators; ties
/// break on start order, keeping the result independent of scheduling.
pub fn estimate_rho(
    space: &FiniteSpace<f64>,
    kernels: &[MarkovKernel<f64>],
    theta: &BlockWeights<f64>,
    config: &AscentConfig,
) -> Result<EstimateReport> {
    let ens = Ensemble::new(space, kernels, theta)?;
    if space.len() < 2 {
        return Err(Error::usage("estimation needs at least two states"));
    }
    let spectral_factor = variance_contraction_spectral(space, kernels, theta)?;
    let seeds = seed_list(&ens, config);
    let outcomes = seeds
        .par_iter()
        .map(|seed| -> Result<StartOutcome> {
            let a = ascend(&ens, seed, config)?;
            let b = lambda_iterate(&ens, seed, config)?;
            Ok(StartOutcome {
                ratio: a.ratio.max(b.ratio),
                h: if a.ratio >= b.ratio { a.h } else { b.h },
                iterations: a.iterations + b.iterations,
                converged: if a.ratio >= b.ratio { a.converged } else { b.converged },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let iterations = outcomes.iter().map(|o| o.iterations).sum();
    let mut best = &outcomes[0];
    for o in &outcomes[1..] {
        if o.ratio > best.ratio {
            best = o;
        }
    }
    let log_z = ens.log_mean_exp(&best.h);
    let witness: Vec<f64> = best.h.iter().map(|v| (v - log_z).exp()).collect();
    let witness_f = Density::new(witness)?;
    let rho_est = ens
        .ratio_of_density(witness_f.values())?
        .unwrap_or(0.0);
    Ok(EstimateReport {
        rho_est,
        witness_f,
        spectral_factor,
        iterations,
        converged: best.converged,
    })
}

/// Largest slope `|f(x) - f(y)| / d(x, y)` over distinct pairs.
pub fn lipschitz_seminorm(metric: &Metric<f64>, f: &[f64]) -> Result<f64> {
    if f.len() != metric.len() {
        return Err(Error::usage(format!(
            "function has {} entries on a {}-state metric",
            f.len(),
            metric.len()
        )));
    }
    let n = metric.len();
    let mut best = 0.0f64;
    for x in 0..n {
        for y in (x + 1)..n {
            best = best.max((f[x] - f[y]).abs() / metric.dist(x, y));
        }
    }
    Ok(best)
}

/// Result of [`bl_duality_check`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct DualityReport {
    /// The contraction constant the exponents were derived from.
    pub kappa: f64,
    /// Exponents `c_i = theta_i / (1 - kappa)`.
    pub c: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Largest signed gap `lhs - rhs` seen; at most roundoff when
    /// `kappa` is a valid contraction constant.
    pub max_violation: f64,
    /// Trial attaining `max_violation`.
    pub worst_trial: usize,
}

/// Signed gap `E[prod_i exp(c_i T_i phi_i)] - prod_i E[exp phi_i]^{c_i}`
/// for one tuple of test functions, by direct summation over the space.
pub fn bl_violation(
    space: &FiniteSpace<f64>,
    kernels: &[MarkovKernel<f64>],
    c: &[f64],
    phis: &[Vec<f64>],
) -> Result<f64> {
    if kernels.is_empty() || kernels.len() != c.len() || kernels.len() != phis.len() {
        return Err(Error::usage("kernels, exponents and test functions must align"));
    }
    for (k, phi) in kernels.iter().zip(phis) {
        if k.len() != space.len() || phi.len() != space.len() {
            return Err(Error::usage("state count mismatch"));
        }
    }
    let n = space.len();
    let mut exponent = vec![0.0; n];
    for ((k, phi), ci) in kernels.iter().zip(phis).zip(c) {
        for (e, v) in exponent.iter_mut().zip(k.apply(phi)) {
            *e += ci * v;
        }
    }
    let lhs: f64 = space
        .p()
        .iter()
        .zip(&exponent)
        .map(|(p, e)| p * e.exp())
        .sum();
    let mut rhs = 1.0f64;
    for (phi, ci) in phis.iter().zip(c) {
        let moment: f64 = space
            .p()
            .iter()
            .zip(phi)
            .map(|(p, v)| p * v.exp())
            .sum();
        rhs *= moment.powf(*ci);
    }
    Ok(lhs - rhs)
}

/// Tests the exponential-moment product inequality implied by entropy
/// contraction at rate `kappa`: draws `trials` tuples of test functions
/// with entries uniform in `[-2, 2]` and reports the largest signed gap.
pub fn bl_duality_check(
    space: &FiniteSpace<f64>,
    kernels: &[MarkovKernel<f64>],
    theta: &BlockWeights<f64>,
    kappa: f64,
    trials: usize,
    seed: u64,
) -> Result<DualityReport> {
    validate_family(space, kernels, theta)?;
    if !(0.0..1.0).contains(&kappa) || kappa == 0.0 {
        return Err(Error::usage(format!(
            "exponents need kappa strictly inside (0, 1), got {kappa}"
        )));
    }
    if trials == 0 {
        return Err(Error::usage("at least one trial is required"));
    }
    let c: Vec<f64> = theta.weights().iter().map(|t| t / (1.0 - kappa)).collect();
    let n = space.len();
    let m = kernels.len();
    let uniform = Uniform::new_inclusive(-2.0, 2.0).expect("valid range");
    let gaps = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<f64> {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed ^ (trial as u64).wrapping_mul(0x9e3779b97f4a7c15));
            let phis: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.sample(uniform)).collect())
                .collect();
            bl_violation(space, kernels, &c, &phis)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut worst_trial = 0;
    for (i, g) in gaps.iter().enumerate() {
        if *g > gaps[worst_trial] {
            worst_trial = i;
        }
    }
    Ok(DualityReport {
        kappa,
        c,
        trials,
        seed,
        max_violation: gaps[worst_trial],
        worst_trial,
    })
}
