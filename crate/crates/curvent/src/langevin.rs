//! Synchronous coupling for the overdamped Langevin diffusion
//! `dX = -grad V(X) dt + sqrt(2) dB` in a convex potential.
//!
//! Two copies driven by the same Brownian motion contract in Euclidean
//! distance at rate at least `rho` when `Hess V >= rho Id`; the
//! simulator verifies that pathwise with Euler steps, and a histogram
//! diagnostic tracks the relative entropy of the time-marginal against
//! the stationary density in one dimension, where the stationary law is
//! available by quadrature. Discretization bias is budgeted into the
//! tolerances of the callers rather than corrected.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

const SEED_MIX: u64 = 0x9e3779b97f4a7c15;
const DIVERGENCE_LIMIT: f64 = 1e6;

/// A potential with an explicit gradient and a claimed convexity
/// modulus. The modulus is an input, not something the trait derives;
/// [`check_convexity`] probes it.
pub trait Potential {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// Claimed largest `rho` with `Hess V >= rho Id`.
    fn rho(&self) -> f64;
}

/// `V(x) = rho |x|^2 / 2`, the Ornstein-Uhlenbeck well.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic {
    pub rho: f64,
}

impl Potential for Quadratic {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.rho * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o = self.rho * v;
        }
    }

    fn rho(&self) -> f64 {
        self.rho
    }
}

/// `V(x) = rho |x|^2 / 2 + log cosh(slope * x_1)`: still `rho`-convex,
/// since the perturbation is convex in `x_1`, but no longer linear in
/// the gradient.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticLogCosh {
    pub rho: f64,
    pub slope: f64,
}

impl Potential for QuadraticLogCosh {
    fn value(&self, x: &[f64]) -> f64 {
        let quad = 0.5 * self.rho * x.iter().map(|v| v * v).sum::<f64>();
        // ln cosh(t) = |t| + ln((1 + e^{-2|t|}) / 2), stable for large t.
        let t = (self.slope * x[0]).abs();
        quad + t + ((1.0 + (-2.0 * t).exp()) / 2.0).ln()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o = self.rho * v;
        }
        out[0] += self.slope * (self.slope * x[0]).tanh();
    }

    fn rho(&self) -> f64 {
        self.rho
    }
}

/// Worst deviation of central finite differences of `value` from
/// `gradient` over random probes, as a relative error.
pub fn check_gradient<P: Potential>(pot: &P, dim: usize, probes: usize, seed: u64) -> Result<f64> {
    if dim == 0 || probes == 0 {
        return Err(Error::usage("need a positive dimension and probe count"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut grad = vec![0.0; dim];
    for _ in 0..probes {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        pot.gradient(&x, &mut grad);
        let scale = grad.iter().map(|g| g.abs()).fold(1.0f64, f64::max);
        for i in 0..dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (pot.value(&xp) - pot.value(&xm)) / (2.0 * h);
            worst = worst.max((fd - grad[i]).abs() / scale);
        }
    }
    Ok(worst)
}

/// Worst margin of the monotonicity inequality
/// `<grad V(x) - grad V(y), x - y> >= rho |x - y|^2` over random
/// segment probes. Nonnegative (up to roundoff) iff the claimed
/// modulus holds along the probed segments.
pub fn check_convexity<P: Potential>(pot: &P, dim: usize, probes: usize, seed: u64) -> Result<f64> {
    if dim == 0 || probes == 0 {
        return Err(Error::usage("need a positive dimension and probe count"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 2.0).expect("fixed parameters");
    let mut gx = vec![0.0; dim];
    let mut gy = vec![0.0; dim];
    let mut worst = f64::INFINITY;
    for _ in 0..probes {
        let x: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
        pot.gradient(&x, &mut gx);
        pot.gradient(&y, &mut gy);
        let mut inner = 0.0;
        let mut sq = 0.0;
        for i in 0..dim {
            let d = x[i] - y[i];
            inner += (gx[i] - gy[i]) * d;
            sq += d * d;
        }
        worst = worst.min(inner - pot.rho() * sq);
    }
    Ok(worst)
}

/// Two Euler trajectories driven by the same Gaussian increments.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CoupledPaths {
    pub times: Vec<f64>,
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<Vec<f64>>,
    /// Euclidean distance per recorded time.
    pub distances: Vec<f64>,
    /// Step index at which the distance left `[0, 1e6]`, if it did;
    /// the arrays stop there.
    pub diverged_at: Option<usize>,
}

fn check_step(dt: f64, rho: f64) -> Result<()> {
    if dt <= 0.0 || !dt.is_finite() || dt > 1e-2 {
        return Err(Error::usage(format!("step size {dt} must lie in (0, 1e-2]")));
    }
    if rho * dt > 0.1 {
        return Err(Error::usage(format!(
            "rho * dt = {} exceeds 0.1; the Euler scheme is not trustworthy there",
            rho * dt
        )));
    }
    Ok(())
}

/// Runs the synchronous coupling from `x0` and `y0` to time `t_end`.
pub fn coupled_paths<P: Potential>(
    pot: &P,
    x0: &[f64],
    y0: &[f64],
    dt: f64,
    t_end: f64,
    seed: u64,
) -> Result<CoupledPaths> {
    check_step(dt, pot.rho())?;
    let dim = x0.len();
    if dim == 0 || y0.len() != dim {
        return Err(Error::usage("start points must share a positive dimension"));
    }
    if x0.iter().chain(y0).any(|v| !v.is_finite()) {
        return Err(Error::domain("start points must be finite"));
    }
    if t_end < dt {
        return Err(Error::usage("t_end must be at least one step"));
    }
    let steps = (t_end / dt).round() as usize;
    let s2dt = (2.0 * dt).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let mut gx = vec![0.0; dim];
    let mut gy = vec![0.0; dim];
    let dist = |x: &[f64], y: &[f64]| -> f64 {
        x.iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };

    let mut out = CoupledPaths {
        times: Vec::with_capacity(steps + 1),
        xs: Vec::with_capacity(steps + 1),
        ys: Vec::with_capacity(steps + 1),
        distances: Vec::with_capacity(steps + 1),
        diverged_at: None,
    };
    out.times.push(0.0);
    out.xs.push(x.clone());
    out.ys.push(y.clone());
    out.distances.push(dist(&x, &y));

    for k in 1..=steps {
        pot.gradient(&x, &mut gx);
        pot.gradient(&y, &mut gy);
        for i in 0..dim {
            let xi: f64 = StandardNormal.sample(&mut rng);
            let kick = s2dt * xi;
            x[i] += -gx[i] * dt + kick;
            y[i] += -gy[i] * dt + kick;
        }
        let d = dist(&x, &y);
        out.times.push(k as f64 * dt);
        out.xs.push(x.clone());
        out.ys.push(y.clone());
        out.distances.push(d);
        if !d.is_finite() || d > DIVERGENCE_LIMIT {
            out.diverged_at = Some(k);
            break;
        }
    }
    Ok(out)
}

/// Least-squares exponential decay rate of a positive distance curve:
/// the negated slope of `log d` against `t`. Entries from the first
/// nonpositive or underflowed distance onward are excluded.
pub fn decay_rate_fit(times: &[f64], distances: &[f64]) -> Result<f64> {
    if times.len() != distances.len() {
        return Err(Error::usage("times and distances must align"));
    }
    let valid = distances
        .iter()
        .position(|d| *d <= 1e-300 || !d.is_finite())
        .unwrap_or(distances.len());
    if valid < 2 {
        return Err(Error::domain(
            "need at least two strictly positive distances to fit a rate",
        ));
    }
    let n = valid as f64;
    let (ts, ds) = (&times[..valid], &distances[..valid]);
    let mean_t = ts.iter().sum::<f64>() / n;
    let mean_l = ds.iter().map(|d| d.ln()).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (t, d) in ts.iter().zip(ds) {
        cov += (t - mean_t) * (d.ln() - mean_l);
        var += (t - mean_t) * (t - mean_t);
    }
    if var == 0.0 {
        return Err(Error::domain("the fit window has no time spread"));
    }
    Ok(-cov / var)
}

/// Relative-entropy decay diagnostic for one-dimensional potentials.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EntropyCurve {
    pub times: Vec<f64>,
    /// Histogram estimate of `Ent(P_t f)` against the stationary law.
    pub entropy: Vec<f64>,
    /// `exp(-2 rho (t - t_0))` times the estimate at the first grid
    /// time.
    pub envelope: Vec<f64>,
    pub bins_used: usize,
    /// True when the requested bin count left fewer than 50 particles
    /// per bin on average and was coarsened.
    pub widened: bool,
    /// Histogram support, padded beyond the sampled range.
    pub support: (f64, f64),
}

fn histogram_entropy<P: Potential>(
    pot: &P,
    values: &[f64],
    lo: f64,
    hi: f64,
    bins: usize,
) -> f64 {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    // Stationary mass per bin by composite Simpson quadrature,
    // normalized over the same support as the histogram.
    let density = |t: f64| (-pot.value(&[t])).exp();
    let bin_mass: Vec<f64> = (0..bins)
        .map(|b| {
            let a = lo + b as f64 * width;
            let sub = 8;
            let h = width / sub as f64;
            let mut s = density(a) + density(a + width);
            for k in 1..sub {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                s += w * density(a + k as f64 * h);
            }
            s * h / 3.0
        })
        .collect();
    let z: f64 = bin_mass.iter().sum();
    let n = values.len() as f64;
    counts
        .iter()
        .zip(&bin_mass)
        .filter(|(c, _)| **c > 0)
        .map(|(&c, &m)| {
            let p = c as f64 / n;
            p * (p / (m / z)).ln()
        })
        .sum()
}

/// Simulates `particles` independent solutions from the initial
/// sampler, snapshots them on `t_grid`, and estimates the relative
/// entropy toward stationarity per snapshot, together with the
/// exponential envelope anchored at the first snapshot.
///
/// One-dimensional potentials only: the stationary density comes from
/// quadrature of `exp(-V)`, which is only airtight on a line. The
/// estimate carries histogram bias; callers budget slack for it.
pub fn entropy_decay_estimate<P, F>(
    pot: &P,
    sample_initial: F,
    t_grid: &[f64],
    dt: f64,
    particles: usize,
    bins: usize,
    seed: u64,
) -> Result<EntropyCurve>
where
    P: Potential + Sync,
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    check_step(dt, pot.rho())?;
    if particles < 100_000 {
        return Err(Error::usage(
            "the histogram diagnostic needs at least 100000 particles",
        ));
    }
    if bins < 8 {
        return Err(Error::usage("need at least eight bins"));
    }
    if t_grid.is_empty() || t_grid[0] < 0.0 {
        return Err(Error::usage("the time grid must start at a nonnegative time"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::usage("the time grid must be strictly increasing"));
    }
    let mut step_counts = Vec::with_capacity(t_grid.len());
    let mut prev = 0.0;
    for &t in t_grid {
        let span = t - prev;
        let steps = (span / dt).round();
        if (span - steps * dt).abs() > 1e-9 {
            return Err(Error::usage(format!(
                "grid gap {span} is not a whole number of steps of {dt}"
            )));
        }
        step_counts.push(steps as usize);
        prev = t;
    }

    let s2dt = (2.0 * dt).sqrt();
    let snapshots: Vec<Vec<f64>> = (0..particles)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(SEED_MIX));
            let mut x = sample_initial(&mut rng);
            let mut grad = [0.0f64];
            let mut row = Vec::with_capacity(t_grid.len());
            for &steps in &step_counts {
                for _ in 0..steps {
                    pot.gradient(&[x], &mut grad);
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    x += -grad[0] * dt + s2dt * xi;
                }
                row.push(x);
            }
            row
        })
        .collect();

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in &snapshots {
        for &v in row {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::numerical("a particle trajectory left the finite range"));
    }
    let pad = 1e-9 * (1.0 + hi.abs().max(lo.abs()));
    lo -= pad;
    hi += pad;

    let mut bins_used = bins;
    let mut widened = false;
    while bins_used > 8 && particles / bins_used < 50 {
        bins_used /= 2;
        widened = true;
    }

    let entropy: Vec<f64> = (0..t_grid.len())
        .map(|k| {
            let column: Vec<f64> = snapshots.iter().map(|row| row[k]).collect();
            histogram_entropy(pot, &column, lo, hi, bins_used)
        })
        .collect();
    let base = entropy[0];
    let envelope: Vec<f64> = t_grid
        .iter()
        .map(|&t| base * (-2.0 * pot.rho() * (t - t_grid[0])).exp())
        .collect();

    Ok(EntropyCurve {
        times: t_grid.to_vec(),
        entropy,
        envelope,
        bins_used,
        widened,
        support: (lo, hi),
    })
}

/// Initial-condition sampler for a Gaussian start.
pub fn gaussian_sampler(mean: f64, sd: f64) -> Result<impl Fn(&mut ChaCha8Rng) -> f64 + Sync + Copy> {
    let normal =
        Normal::new(mean, sd).map_err(|e| Error::usage(format!("invalid Gaussian start: {e}")))?;
    Ok(move |rng: &mut ChaCha8Rng| normal.sample(rng))
}
