//! Cone measure on the unit sphere of `ell_p` and the coupling side of
//! its block-resampling contraction constant.
//!
//! Points carry their coordinate moduli `|x_i|^p` so the special metric
//!
//! ```text
//!   dist(x, y) = sum_i | |x_i|^p - |y_i|^p | + #{ i : x_i y_i < 0 }
//! ```
//!
//! and the closed-form block Wasserstein distance of
//! [`closed_form_w`] are cheap sums. Resampling the coordinates in a
//! block `A` from the conditional cone measure contracts this metric by
//! a factor that [`contraction_check`] sweeps over random, sign-aligned,
//! single-sign-flip and canonical-basis pairs; the worst aggregated
//! ratio over a weighted family is `1 - theta_star_star`, attained at a
//! pair of canonical basis vectors whose indices realize the pair
//! coverage minimum.
//!
//! A zero coordinate never counts as a sign flip: the indicator is on
//! the strict inequality `x_i y_i < 0`. Cone-measure samples have no
//! zero coordinates almost surely, so the convention only shows up on
//! hand-built points.

use crate::error::{Error, Result};
use crate::models::BlockFamily;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

const NORM_TOL: f64 = 1e-10;
const SEED_MIX: u64 = 0x9e3779b97f4a7c15;

/// A point of the unit `ell_p` sphere with its moduli cached.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    coords: Vec<f64>,
    moduli: Vec<f64>,
    p: f64,
}

impl SpherePoint {
    pub fn new(coords: Vec<f64>, p: f64) -> Result<Self> {
        if p <= 0.0 || !p.is_finite() {
            return Err(Error::usage(format!("exponent p = {p} must be positive")));
        }
        if coords.is_empty() {
            return Err(Error::usage("a sphere point needs at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("coordinates must be finite"));
        }
        let moduli: Vec<f64> = coords.iter().map(|c| c.abs().powf(p)).collect();
        let norm: f64 = moduli.iter().sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::domain(format!(
                "sum of |x_i|^p is {norm}, off the sphere by more than {NORM_TOL:e}"
            )));
        }
        Ok(SpherePoint { coords, moduli, p })
    }

    /// The canonical basis vector `e_i`, a sphere point for every `p`.
    pub fn canonical(n: usize, p: f64, i: usize) -> Result<Self> {
        if i >= n {
            return Err(Error::usage(format!("basis index {i} out of range for n = {n}")));
        }
        let mut coords = vec![0.0; n];
        coords[i] = 1.0;
        SpherePoint::new(coords, p)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Cached `|x_i|^p`.
    pub fn moduli(&self) -> &[f64] {
        &self.moduli
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    fn flip(&self, i: usize) -> SpherePoint {
        let mut out = self.clone();
        out.coords[i] = -out.coords[i];
        out
    }

    /// Copy of `self` whose signs are taken from `reference` wherever
    /// the reference coordinate is nonzero.
    fn with_signs_of(&self, reference: &SpherePoint) -> SpherePoint {
        let mut out = self.clone();
        for (c, r) in out.coords.iter_mut().zip(&reference.coords) {
            if *r != 0.0 {
                *c = c.abs().copysign(*r);
            }
        }
        out
    }
}

fn check_compatible(x: &SpherePoint, y: &SpherePoint) -> Result<()> {
    if x.dim() != y.dim() || x.p != y.p {
        return Err(Error::usage(format!(
            "points live on different spheres: (n, p) = ({}, {}) vs ({}, {})",
            x.dim(),
            x.p,
            y.dim(),
            y.p
        )));
    }
    Ok(())
}

fn sample_one(n: usize, p: f64, gamma: &Gamma<f64>, rng: &mut ChaCha8Rng) -> SpherePoint {
    let mut w = vec![0.0f64; n];
    let mut signs = vec![1.0f64; n];
    let mut total = 0.0;
    for i in 0..n {
        w[i] = gamma.sample(rng);
        total += w[i];
        if rng.random::<bool>() {
            signs[i] = -1.0;
        }
    }
    let coords: Vec<f64> = (0..n)
        .map(|i| signs[i] * (w[i] / total).powf(1.0 / p))
        .collect();
    let moduli: Vec<f64> = coords.iter().map(|c| c.abs().powf(p)).collect();
    SpherePoint { coords, moduli, p }
}

/// Draws `count` independent cone-measure samples: `|G_i| = W_i^{1/p}`
/// with `W_i` Gamma of shape `1/p`, uniform signs, normalized by
/// `(sum W_i)^{1/p}`. For `p = 2` this is the uniform surface measure.
pub fn cone_sample(n: usize, p: f64, count: usize, seed: u64) -> Result<Vec<SpherePoint>> {
    if n < 2 {
        return Err(Error::usage("cone sampling needs at least two coordinates"));
    }
    if p <= 0.0 || !p.is_finite() {
        return Err(Error::usage(format!("exponent p = {p} must be positive")));
    }
    let gamma = Gamma::new(1.0 / p, 1.0)
        .map_err(|e| Error::usage(format!("invalid Gamma parameters: {e}")))?;
    Ok((0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(SEED_MIX));
            sample_one(n, p, &gamma, &mut rng)
        })
        .collect())
}

/// The sphere metric: total variation of the moduli plus the number of
/// strict sign disagreements.
pub fn sphere_dist(x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    check_compatible(x, y)?;
    let mut d = 0.0;
    for i in 0..x.dim() {
        d += (x.moduli[i] - y.moduli[i]).abs();
        if x.coords[i] * y.coords[i] < 0.0 {
            d += 1.0;
        }
    }
    Ok(d)
}

/// Exact `W_1 = W_inf` distance between the conditional laws obtained
/// by resampling the coordinates in `a_mask` from the cone measure:
/// the off-block terms of the metric plus the modulus of the net
/// on-block mass shift. Never exceeds [`sphere_dist`].
pub fn closed_form_w(x: &SpherePoint, y: &SpherePoint, a_mask: u32) -> Result<f64> {
    check_compatible(x, y)?;
    let n = x.dim();
    if n > 20 {
        return Err(Error::usage("subset masks support at most 20 coordinates"));
    }
    let full = (1u32 << n) - 1;
    if a_mask == 0 || a_mask & !full != 0 {
        return Err(Error::usage(format!(
            "block mask {a_mask:#b} must be nonempty and within {n} coordinates"
        )));
    }
    let mut off_block = 0.0;
    let mut shift = 0.0;
    for i in 0..n {
        let diff = x.moduli[i] - y.moduli[i];
        if a_mask & (1 << i) != 0 {
            shift += diff;
        } else {
            off_block += diff.abs();
            if x.coords[i] * y.coords[i] < 0.0 {
                off_block += 1.0;
            }
        }
    }
    Ok(off_block + shift.abs())
}

/// How a worst-ratio pair was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairKind {
    Random,
    SameSign,
    SignFlip,
    CanonicalBasis,
}

/// One evaluated pair with its aggregated contraction ratio.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RatioSample {
    pub ratio: f64,
    pub kind: PairKind,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Contraction ratio at one canonical-basis pair `(e_i, e_j)`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CanonicalRatio {
    pub i: usize,
    pub j: usize,
    /// Total weight of blocks containing both `i` and `j`.
    pub coverage: f64,
    pub ratio: f64,
}

/// Outcome of [`contraction_check`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct SphereReport {
    pub n: usize,
    pub p: f64,
    pub theta_star: f64,
    pub theta_star_star: f64,
    /// `1 - theta_star_star`, the proven ceiling for every ratio.
    pub bound: f64,
    pub max_ratio: f64,
    pub worst: RatioSample,
    /// Ratio at the canonical-basis pair whose indices minimize pair
    /// coverage; equals the ceiling up to roundoff.
    pub canonical_ratio: f64,
    pub canonical_pair: (usize, usize),
    pub pairs_evaluated: usize,
    pub within_bound: bool,
    pub canonical_attains: bool,
    /// One entry per canonical-basis pair, sorted by index.
    pub canonical_sweep: Vec<CanonicalRatio>,
}

fn pair_coverage(family: &BlockFamily<f64>, i: usize, j: usize) -> f64 {
    let mask = (1u32 << i) | (1 << j);
    family
        .blocks()
        .iter()
        .zip(family.theta().weights())
        .filter(|(b, _)| *b & mask == mask)
        .map(|(_, w)| *w)
        .sum()
}

fn aggregated_ratio(family: &BlockFamily<f64>, x: &SpherePoint, y: &SpherePoint) -> Option<f64> {
    let n = x.dim();
    let mut total_abs = 0.0;
    let mut diffs = vec![0.0f64; n];
    let mut flip = vec![false; n];
    let mut total_flips = 0.0;
    for i in 0..n {
        diffs[i] = x.moduli[i] - y.moduli[i];
        total_abs += diffs[i].abs();
        if x.coords[i] * y.coords[i] < 0.0 {
            flip[i] = true;
            total_flips += 1.0;
        }
    }
    let dist = total_abs + total_flips;
    if dist <= 1e-12 {
        return None;
    }
    let mut acc = 0.0;
    for (&mask, &w) in family.blocks().iter().zip(family.theta().weights()) {
        let mut on_abs = 0.0;
        let mut on_flips = 0.0;
        let mut shift = 0.0;
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            on_abs += diffs[i].abs();
            shift += diffs[i];
            if flip[i] {
                on_flips += 1.0;
            }
        }
        let w_a = (total_abs - on_abs) + (total_flips - on_flips) + shift.abs();
        acc += w * w_a;
    }
    Some(acc / dist)
}

/// Sweeps the aggregated contraction ratio
/// `sum_A theta_A W(x, y, A) / dist(x, y)` over `pairs` random
/// cone-measure pairs plus the structured families that saturate it,
/// and reports the worst ratio against the `1 - theta_star_star`
/// ceiling.
pub fn contraction_check(
    family: &BlockFamily<f64>,
    p: f64,
    pairs: usize,
    seed: u64,
) -> Result<SphereReport> {
    let n = family.n_sites();
    if n < 2 {
        return Err(Error::usage("the sphere sweep needs at least two coordinates"));
    }
    let theta_star = family.theta_star();
    let theta_star_star = family.theta_star_star()?;
    let bound = 1.0 - theta_star_star;

    if p <= 0.0 || !p.is_finite() {
        return Err(Error::usage(format!("exponent p = {p} must be positive")));
    }
    let gamma = Gamma::new(1.0 / p, 1.0)
        .map_err(|e| Error::usage(format!("invalid Gamma parameters: {e}")))?;

    let record = |x: &SpherePoint, y: &SpherePoint, kind: PairKind| -> Option<RatioSample> {
        aggregated_ratio(family, x, y).map(|ratio| RatioSample {
            ratio,
            kind,
            x: x.coords.clone(),
            y: y.coords.clone(),
        })
    };

    let random_samples: Vec<RatioSample> = (0..pairs)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(SEED_MIX));
            let x = sample_one(n, p, &gamma, &mut rng);
            let y = sample_one(n, p, &gamma, &mut rng);
            record(&x, &y, PairKind::Random)
        })
        .collect();

    let mut structured: Vec<RatioSample> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ca1ab1e);
    for _ in 0..64 {
        let x = sample_one(n, p, &gamma, &mut rng);
        let y = sample_one(n, p, &gamma, &mut rng).with_signs_of(&x);
        structured.extend(record(&x, &y, PairKind::SameSign));
    }
    for _ in 0..8 {
        let x = sample_one(n, p, &gamma, &mut rng);
        for i in 0..n {
            if x.coords[i] != 0.0 {
                structured.extend(record(&x, &x.flip(i), PairKind::SignFlip));
            }
        }
    }

    let mut canonical_pair = (0, 1);
    let mut canonical_cover = f64::INFINITY;
    let mut canonical_at_min = f64::NAN;
    let mut canonical_sweep = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let e_i = SpherePoint::canonical(n, p, i)?;
            let e_j = SpherePoint::canonical(n, p, j)?;
            if let Some(sample) = record(&e_i, &e_j, PairKind::CanonicalBasis) {
                let cover = pair_coverage(family, i, j);
                canonical_sweep.push(CanonicalRatio {
                    i,
                    j,
                    coverage: cover,
                    ratio: sample.ratio,
                });
                if cover < canonical_cover {
                    canonical_cover = cover;
                    canonical_pair = (i, j);
                    canonical_at_min = sample.ratio;
                }
                structured.push(sample);
            }
        }
    }

    let pairs_evaluated = random_samples.len() + structured.len();
    let worst = random_samples
        .into_iter()
        .chain(structured)
        .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .expect("canonical pairs always produce at least one ratio");
    let max_ratio = worst.ratio;

    Ok(SphereReport {
        n,
        p,
        theta_star,
        theta_star_star,
        bound,
        max_ratio,
        worst,
        canonical_ratio: canonical_at_min,
        canonical_pair,
        pairs_evaluated,
        within_bound: max_ratio <= bound + 1e-9,
        canonical_attains: (canonical_at_min - bound).abs() <= 1e-9,
        canonical_sweep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::BlockWeights;
    use crate::metric::Metric;
    use crate::transport::{w1, winf};
    use approx::assert_abs_diff_eq;

    #[test]
    fn samples_sit_on_the_sphere() {
        for &p in &[1.0, 2.0, 4.0] {
            for &n in &[2usize, 3, 6] {
                for pt in cone_sample(n, p, 100, 7).unwrap() {
                    let norm: f64 = pt.moduli().iter().sum();
                    assert!((norm - 1.0).abs() <= 1e-10, "p={p} n={n}: norm {norm}");
                    SpherePoint::new(pt.coords().to_vec(), p).unwrap();
                }
            }
        }
    }

    #[test]
    fn euclidean_sphere_moments() {
        let samples = cone_sample(3, 2.0, 100_000, 42).unwrap();
        let m = samples.len() as f64;
        let mean_sq: f64 = samples.iter().map(|s| s.coords()[0].powi(2)).sum::<f64>() / m;
        // Var(X_1^2) = 1/5 - 1/9 on the uniform 2-sphere.
        let se_sq = (4.0 / 45.0f64 / m).sqrt();
        assert!(
            (mean_sq - 1.0 / 3.0).abs() <= 3.0 * se_sq,
            "E[X_1^2] = {mean_sq}, off by more than 3 standard errors"
        );
        let mean: f64 = samples.iter().map(|s| s.coords()[0]).sum::<f64>() / m;
        let se = (1.0 / 3.0f64 / m).sqrt();
        assert!(mean.abs() <= 3.0 * se, "E[X_1] = {mean}");
    }

    #[test]
    fn metric_hand_values() {
        let e1 = SpherePoint::canonical(4, 2.0, 0).unwrap();
        let e2 = SpherePoint::canonical(4, 2.0, 1).unwrap();
        assert_eq!(sphere_dist(&e1, &e1).unwrap(), 0.0);
        assert_eq!(sphere_dist(&e1, &e2).unwrap(), 2.0);
        let minus = e1.flip(0);
        assert_eq!(sphere_dist(&e1, &minus).unwrap(), 1.0);
        assert_eq!(
            sphere_dist(&e1, &e2).unwrap(),
            sphere_dist(&e2, &e1).unwrap()
        );
        let other_p = SpherePoint::canonical(4, 1.0, 0).unwrap();
        assert!(sphere_dist(&e1, &other_p).is_err());
    }

    #[test]
    fn closed_form_hand_values() {
        let e1 = SpherePoint::canonical(4, 2.0, 0).unwrap();
        let e2 = SpherePoint::canonical(4, 2.0, 1).unwrap();
        assert_eq!(closed_form_w(&e1, &e1, 0b0011).unwrap(), 0.0);
        // A contains both indices: the conditional laws coincide.
        assert_eq!(closed_form_w(&e1, &e2, 0b0011).unwrap(), 0.0);
        assert_eq!(closed_form_w(&e1, &e2, 0b1011).unwrap(), 0.0);
        // A contains only one of them: no contraction at all.
        assert_eq!(closed_form_w(&e1, &e2, 0b0001).unwrap(), 2.0);
        assert_eq!(closed_form_w(&e1, &e2, 0b0100).unwrap(), 2.0);
        assert!(closed_form_w(&e1, &e2, 0).is_err());
        assert!(closed_form_w(&e1, &e2, 0b10000).is_err());
    }

    #[test]
    fn closed_form_never_exceeds_the_metric() {
        for &p in &[1.0, 2.0, 4.0] {
            let pts = cone_sample(5, p, 60, 11).unwrap();
            for pair in pts.chunks(2) {
                let (x, y) = (&pair[0], &pair[1]);
                let d = sphere_dist(x, y).unwrap();
                for mask in 1u32..(1 << 5) {
                    let w = closed_form_w(x, y, mask).unwrap();
                    assert!(w <= d + 1e-12, "p={p} mask={mask:#b}: {w} > {d}");
                    assert_abs_diff_eq!(
                        w,
                        closed_form_w(y, x, mask).unwrap(),
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    /// Resampling one of two coordinates has an explicitly computable
    /// conditional law (two equal atoms), so the closed form can be
    /// checked against the generic transport solvers.
    #[test]
    fn two_coordinate_laws_match_the_transport_solvers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &p in &[1.0, 2.0, 4.0] {
            for _ in 0..8 {
                let a: f64 = rng.random_range(0.05..0.95);
                let b: f64 = rng.random_range(0.05..0.95);
                let sign: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
                // x fixes coordinate 1 at a^(1/p), y at sign * b^(1/p).
                let x = SpherePoint::new(vec![(1.0 - a).powf(1.0 / p), a.powf(1.0 / p)], p)
                    .unwrap();
                let y = SpherePoint::new(
                    vec![(1.0 - b).powf(1.0 / p), sign * b.powf(1.0 / p)],
                    p,
                )
                .unwrap();
                // Conditional supports after resampling coordinate 0.
                let atoms: Vec<SpherePoint> = [&x, &y]
                    .iter()
                    .flat_map(|pt| {
                        let kept = pt.coords()[1];
                        let r = (1.0 - pt.moduli()[1]).powf(1.0 / p);
                        [
                            SpherePoint::new(vec![r, kept], p).unwrap(),
                            SpherePoint::new(vec![-r, kept], p).unwrap(),
                        ]
                    })
                    .collect();
                let metric = Metric::from_fn(4, |i, j| {
                    sphere_dist(&atoms[i], &atoms[j]).unwrap()
                })
                .unwrap();
                let mu = [0.5, 0.5, 0.0, 0.0];
                let nu = [0.0, 0.0, 0.5, 0.5];
                let expected = closed_form_w(&x, &y, 0b01).unwrap();
                let (w1_val, _) = w1(&metric, &mu, &nu).unwrap();
                let (winf_val, _) = winf(&metric, &mu, &nu).unwrap();
                assert_abs_diff_eq!(w1_val, expected, epsilon = 1e-10);
                assert_abs_diff_eq!(winf_val, expected, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn full_block_family_contracts_everything() {
        let family: BlockFamily<f64> =
            BlockFamily::new(4, vec![0b1111], BlockWeights::uniform(1).unwrap()).unwrap();
        let report = contraction_check(&family, 2.0, 300, 5).unwrap();
        assert_abs_diff_eq!(report.theta_star_star, 1.0, epsilon = 0.0);
        assert!(report.max_ratio <= 1e-12, "max ratio {}", report.max_ratio);
        assert!(report.within_bound && report.canonical_attains);
    }

    #[test]
    fn pair_blocks_attain_the_pair_coverage_bound() {
        let family: BlockFamily<f64> = BlockFamily::site_pairs(4).unwrap();
        let report = contraction_check(&family, 2.0, 2_000, 9).unwrap();
        assert_abs_diff_eq!(report.theta_star_star, 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(report.max_ratio, 5.0 / 6.0, epsilon = 1e-9);
        assert_abs_diff_eq!(report.canonical_ratio, 5.0 / 6.0, epsilon = 1e-9);
        assert!(report.within_bound && report.canonical_attains);
        assert!(report.worst.ratio >= report.canonical_ratio - 1e-12);

        assert_eq!(report.canonical_sweep.len(), 6);
        for entry in &report.canonical_sweep {
            assert_abs_diff_eq!(entry.coverage, 1.0 / 6.0, epsilon = 1e-15);
            assert_abs_diff_eq!(entry.ratio, 1.0 - entry.coverage, epsilon = 1e-9);
        }
    }

    #[test]
    fn random_families_stay_under_the_ceiling() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for &p in &[1.0, 2.0, 4.0] {
            for trial in 0..3 {
                let n = [3usize, 4, 6][trial % 3];
                let m = rng.random_range(3..7);
                let mut masks = Vec::new();
                while masks.len() < m {
                    let mask = rng.random_range(1u32..(1 << n));
                    if !masks.contains(&mask) {
                        masks.push(mask);
                    }
                }
                let weights: Vec<i64> = (0..m).map(|_| rng.random_range(1..9)).collect();
                let family: BlockFamily<f64> =
                    BlockFamily::new(n, masks, BlockWeights::from_integers(&weights).unwrap())
                        .unwrap();
                assert!(family.theta_star_star().unwrap() <= family.theta_star() + 1e-15);
                let report = contraction_check(&family, p, 400, 1000 + trial as u64).unwrap();
                assert!(
                    report.within_bound,
                    "p={p} trial={trial}: ratio {} > bound {}",
                    report.max_ratio, report.bound
                );
                assert!(report.canonical_attains);
            }
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let family: BlockFamily<f64> = BlockFamily::site_pairs(3).unwrap();
        let a = contraction_check(&family, 2.0, 500, 123).unwrap();
        let b = contraction_check(&family, 2.0, 500, 123).unwrap();
        assert_eq!(a.max_ratio, b.max_ratio);
        assert_eq!(a.worst.x, b.worst.x);
        assert_eq!(a.worst.y, b.worst.y);
        assert_eq!(a.pairs_evaluated, b.pairs_evaluated);
    }
}
