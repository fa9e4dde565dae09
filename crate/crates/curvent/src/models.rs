//! Model zoo: block dynamics whose contraction constants have known
//! closed forms.
//!
//! A [`BlockFamily`] fixes a ground set of sites and weighted subsets
//! ("blocks"); the derived quantities
//!
//! ```text
//!   theta_star      = min_i   sum over blocks containing i
//!   theta_star_star = min_i<j sum over blocks containing both i and j
//! ```
//!
//! are the constants the models below are calibrated against:
//!
//! * [`build_product`]: product spaces with Hamming metric and
//!   block-resampling kernels; the certified constant is exactly
//!   `theta_star`.
//! * [`build_permutations`]: uniform permutations with position-block
//!   shuffles under the transposition (Cayley) metric; the certified
//!   constant is `theta_star_star`. Blocks act on positions; the
//!   value-block variant is conjugate to it and not built separately.
//! * [`build_nsets`]: down-up walks on `n`-element subsets of `[N]`
//!   under the overlap metric `d(X, Y) = n - |X intersect Y|`, with the
//!   closed-form rate of [`downup_theoretical_kappa`].
//!
//! Builders return a [`ModelInstance`]: space, kernels, weights and
//! metric, with generator edges attached so both certification modes
//! apply. Kernels are stored densely, so instances are guarded by an
//! estimated memory footprint rather than silently thrashing.

use crate::error::{Error, Result};
use crate::family::BlockWeights;
use crate::kernel::{conditional_kernel, MarkovKernel};
use crate::metric::Metric;
use crate::scalar::Scalar;
use crate::space::FiniteSpace;

/// Upper bound on dense kernel storage a builder may request, in bytes
/// per scalar slot (the f64 figure; rationals cost more per slot but the
/// guard is about orders of magnitude, not accounting).
const MAX_DENSE_BYTES: usize = 3 << 30;

fn check_footprint(states: usize, kernels: usize) -> Result<()> {
    // Kernels plus their adjoints during certification.
    let slots = states
        .checked_mul(states)
        .and_then(|s| s.checked_mul(2 * kernels.max(1)))
        .and_then(|s| s.checked_mul(8));
    match slots {
        Some(bytes) if bytes <= MAX_DENSE_BYTES => Ok(()),
        _ => Err(Error::usage(format!(
            "instance needs {states} states x {kernels} dense kernels; over the memory budget"
        ))),
    }
}

/// Weighted family of site subsets, sites indexed `0..n_sites`, blocks
/// as bitmasks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFamily<S: Scalar = f64> {
    n_sites: usize,
    blocks: Vec<u32>,
    theta: BlockWeights<S>,
}

impl<S: Scalar> BlockFamily<S> {
    pub fn new(n_sites: usize, blocks: Vec<u32>, theta: BlockWeights<S>) -> Result<Self> {
        if n_sites == 0 || n_sites > 20 {
            return Err(Error::usage(format!("{n_sites} sites out of supported range 1..=20")));
        }
        if blocks.is_empty() || blocks.len() != theta.len() {
            return Err(Error::usage(format!(
                "{} blocks with {} weights",
                blocks.len(),
                theta.len()
            )));
        }
        let full = if n_sites == 32 { u32::MAX } else { (1u32 << n_sites) - 1 };
        let mut seen = std::collections::HashSet::new();
        for &b in &blocks {
            if b == 0 {
                return Err(Error::domain("empty block"));
            }
            if b & !full != 0 {
                return Err(Error::domain(format!(
                    "block {b:#b} uses sites outside 0..{n_sites}"
                )));
            }
            if !seen.insert(b) {
                return Err(Error::domain(format!("duplicate block {b:#b}")));
            }
        }
        Ok(BlockFamily { n_sites, blocks, theta })
    }

    /// All singletons, uniformly weighted.
    pub fn singletons(n_sites: usize) -> Result<Self> {
        let blocks: Vec<u32> = (0..n_sites).map(|i| 1 << i).collect();
        let theta = BlockWeights::uniform(blocks.len())?;
        Self::new(n_sites, blocks, theta)
    }

    /// All two-site blocks, uniformly weighted.
    pub fn site_pairs(n_sites: usize) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::usage("pair blocks need at least two sites"));
        }
        let mut blocks = Vec::new();
        for i in 0..n_sites {
            for j in (i + 1)..n_sites {
                blocks.push((1 << i) | (1 << j));
            }
        }
        let theta = BlockWeights::uniform(blocks.len())?;
        Self::new(n_sites, blocks, theta)
    }

    /// All complements of singletons, uniformly weighted.
    pub fn all_but_one(n_sites: usize) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::usage("all-but-one blocks need at least two sites"));
        }
        let full = (1u32 << n_sites) - 1;
        let blocks: Vec<u32> = (0..n_sites).map(|i| full & !(1 << i)).collect();
        let theta = BlockWeights::uniform(blocks.len())?;
        Self::new(n_sites, blocks, theta)
    }

    /// All blocks of size `ell`, uniformly weighted.
    pub fn size_uniform(n_sites: usize, ell: usize) -> Result<Self> {
        if ell == 0 || ell > n_sites {
            return Err(Error::usage(format!("block size {ell} out of 1..={n_sites}")));
        }
        let full = (1u32 << n_sites) - 1;
        let blocks: Vec<u32> = (1..=full)
            .filter(|b| b.count_ones() as usize == ell)
            .collect();
        let theta = BlockWeights::uniform(blocks.len())?;
        Self::new(n_sites, blocks, theta)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn blocks(&self) -> &[u32] {
        &self.blocks
    }

    pub fn theta(&self) -> &BlockWeights<S> {
        &self.theta
    }

    /// Smallest total weight covering a single site.
    pub fn theta_star(&self) -> S {
        (0..self.n_sites)
            .map(|i| {
                self.blocks
                    .iter()
                    .zip(self.theta.weights())
                    .filter(|(b, _)| *b & (1 << i) != 0)
                    .fold(S::zero(), |acc, (_, w)| acc + w.clone())
            })
            .min_by(|a, b| a.partial_cmp(b).expect("weights are ordered"))
            .expect("at least one site")
    }

    /// Smallest total weight covering a pair of sites.
    pub fn theta_star_star(&self) -> Result<S> {
        if self.n_sites < 2 {
            return Err(Error::usage("pair coverage needs at least two sites"));
        }
        let mut best: Option<S> = None;
        for i in 0..self.n_sites {
            for j in (i + 1)..self.n_sites {
                let mask = (1u32 << i) | (1 << j);
                let cover = self
                    .blocks
                    .iter()
                    .zip(self.theta.weights())
                    .filter(|(b, _)| *b & mask == mask)
                    .fold(S::zero(), |acc, (_, w)| acc + w.clone());
                if best.as_ref().is_none_or(|b| cover < *b) {
                    best = Some(cover);
                }
            }
        }
        Ok(best.expect("at least one pair"))
    }

    pub fn to_f64(&self) -> BlockFamily<f64> {
        BlockFamily {
            n_sites: self.n_sites,
            blocks: self.blocks.clone(),
            theta: self.theta.to_f64(),
        }
    }
}

/// A fully assembled weighted family: everything the certifier and the
/// estimator need.
#[derive(Debug, Clone)]
pub struct ModelInstance<S: Scalar = f64> {
    pub space: FiniteSpace<S>,
    pub kernels: Vec<MarkovKernel<S>>,
    pub theta: BlockWeights<S>,
    pub metric: Metric<S>,
}

impl<S: Scalar> ModelInstance<S> {
    pub fn to_f64(&self) -> ModelInstance<f64> {
        ModelInstance {
            space: self.space.to_f64(),
            kernels: self.kernels.iter().map(MarkovKernel::to_f64).collect(),
            theta: self.theta.to_f64(),
            metric: self.metric.to_f64(),
        }
    }
}

// ---------------------------------------------------------------------
// Product spaces.
// ---------------------------------------------------------------------

/// Block resampling on a finite product space under the uniform measure,
/// with the Hamming metric generated by single-coordinate moves.
pub fn build_product<S: Scalar>(
    sizes: &[usize],
    family: &BlockFamily<S>,
) -> Result<ModelInstance<S>> {
    let marginals: Vec<Vec<S>> = sizes
        .iter()
        .map(|&m| {
            if m < 2 {
                Err(Error::usage("each coordinate needs at least two values"))
            } else {
                Ok(vec![S::from_ratio(1, m as i64); m])
            }
        })
        .collect::<Result<_>>()?;
    build_product_with_marginals(&marginals, family)
}

/// Same as [`build_product`] with explicit per-coordinate marginals.
pub fn build_product_with_marginals<S: Scalar>(
    marginals: &[Vec<S>],
    family: &BlockFamily<S>,
) -> Result<ModelInstance<S>> {
    let d = marginals.len();
    if d != family.n_sites() {
        return Err(Error::usage(format!(
            "{d} coordinates for a family on {} sites",
            family.n_sites()
        )));
    }
    let sizes: Vec<usize> = marginals.iter().map(Vec::len).collect();
    let total: usize = sizes.iter().product();
    if total > 65536 {
        return Err(Error::usage(format!("product space has {total} states")));
    }
    check_footprint(total, family.blocks().len())?;

    let digits_of = |mut idx: usize| -> Vec<usize> {
        let mut digits = vec![0usize; d];
        for c in 0..d {
            digits[c] = idx % sizes[c];
            idx /= sizes[c];
        }
        digits
    };

    let mut p = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for idx in 0..total {
        let digits = digits_of(idx);
        let mass = digits
            .iter()
            .enumerate()
            .fold(S::one(), |acc, (c, &v)| acc * marginals[c][v].clone());
        p.push(mass);
        labels.push(
            digits
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(""),
        );
    }
    let space = FiniteSpace::with_labels(labels, p)?;

    let mut kernels = Vec::with_capacity(family.blocks().len());
    for &block in family.blocks() {
        // Cell of a state: its coordinates outside the block, packed in
        // mixed radix.
        let cells: Vec<usize> = (0..total)
            .map(|idx| {
                let digits = digits_of(idx);
                let mut cell = 0usize;
                for c in (0..d).rev() {
                    if block & (1 << c) == 0 {
                        cell = cell * sizes[c] + digits[c];
                    }
                }
                cell
            })
            .collect();
        kernels.push(conditional_kernel(&space, &cells)?);
    }

    let metric = {
        let digit_cache: Vec<Vec<usize>> = (0..total).map(digits_of).collect();
        let mut edges = Vec::new();
        for x in 0..total {
            for y in (x + 1)..total {
                if hamming(&digit_cache[x], &digit_cache[y]) == 1 {
                    edges.push((x, y));
                }
            }
        }
        Metric::from_fn(total, |x, y| {
            S::from_int(hamming(&digit_cache[x], &digit_cache[y]) as i64)
        })?
        .with_generators(edges)?
    };

    Ok(ModelInstance {
        space,
        kernels,
        theta: family.theta().clone(),
        metric,
    })
}

fn hamming(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

// ---------------------------------------------------------------------
// Permutations.
// ---------------------------------------------------------------------

/// All permutations of `0..n` in lexicographic one-line order.
pub fn enumerate_permutations(n: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut current: Vec<u8> = (0..n as u8).collect();
    loop {
        out.push(current.clone());
        // Next lexicographic permutation.
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1])
        else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| current[j] > current[i]).unwrap();
        current.swap(i, j);
        current[i + 1..].reverse();
    }
    out
}

/// Transposition (Cayley) distance: `n` minus the number of cycles of
/// `sigma eta^{-1}`.
pub fn cayley_distance(sigma: &[u8], eta: &[u8]) -> usize {
    let n = sigma.len();
    let mut eta_inv = vec![0u8; n];
    for (pos, &v) in eta.iter().enumerate() {
        eta_inv[v as usize] = pos as u8;
    }
    // pi = sigma composed with eta^{-1}, as a map on values.
    let mut seen = vec![false; n];
    let mut cycles = 0usize;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        cycles += 1;
        let mut v = start;
        while !seen[v] {
            seen[v] = true;
            v = sigma[eta_inv[v] as usize] as usize;
        }
    }
    n - cycles
}

/// Position-block shuffles on the symmetric group under the uniform
/// measure and the Cayley metric, generated by transposition edges.
///
/// Blocks index positions; the kernel of block `A` redistributes the
/// values currently occupying `A` uniformly over `A`.
pub fn build_permutations<S: Scalar>(
    n: usize,
    family: &BlockFamily<S>,
) -> Result<ModelInstance<S>> {
    if n != family.n_sites() {
        return Err(Error::usage(format!(
            "permutations of {n} items for a family on {} sites",
            family.n_sites()
        )));
    }
    if !(2..=7).contains(&n) {
        return Err(Error::usage(format!("permutation degree {n} out of supported range 2..=7")));
    }
    let perms = enumerate_permutations(n);
    let total = perms.len();
    check_footprint(total, family.blocks().len())?;
    let index: std::collections::HashMap<Vec<u8>, usize> = perms
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), i))
        .collect();

    let labels: Vec<String> = perms
        .iter()
        .map(|p| p.iter().map(|v| (v + 1).to_string()).collect())
        .collect();
    let space = FiniteSpace::with_labels(labels, vec![S::from_ratio(1, total as i64); total])?;

    let mut kernels = Vec::with_capacity(family.blocks().len());
    for &block in family.blocks() {
        let positions: Vec<usize> = (0..n).filter(|&i| block & (1 << i) != 0).collect();
        let arrangements = enumerate_permutations(positions.len());
        let mass = S::from_ratio(1, arrangements.len() as i64);
        let mut rows = vec![S::zero(); total * total];
        for (x, sigma) in perms.iter().enumerate() {
            for arr in &arrangements {
                let mut tau = sigma.clone();
                for (slot, &src) in arr.iter().enumerate() {
                    tau[positions[slot]] = sigma[positions[src as usize]];
                }
                let y = index[&tau];
                rows[x * total + y] = rows[x * total + y].clone() + mass.clone();
            }
        }
        let rows: Vec<Vec<S>> = rows.chunks(total).map(<[S]>::to_vec).collect();
        kernels.push(MarkovKernel::from_rows(rows)?);
    }

    let mut edges = Vec::new();
    for x in 0..total {
        for y in (x + 1)..total {
            if cayley_distance(&perms[x], &perms[y]) == 1 {
                edges.push((x, y));
            }
        }
    }
    let metric = Metric::from_fn(total, |x, y| {
        S::from_int(cayley_distance(&perms[x], &perms[y]) as i64)
    })?
    .with_generators(edges)?;

    Ok(ModelInstance {
        space,
        kernels,
        theta: family.theta().clone(),
        metric,
    })
}

// ---------------------------------------------------------------------
// Down-up walks on n-subsets.
// ---------------------------------------------------------------------

fn binomial(n: usize, k: usize) -> i64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: i64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i64 / (i + 1) as i64;
    }
    acc
}

/// All `k`-element subsets of `0..n` as bitmasks in increasing numeric
/// order.
fn enumerate_subsets(n: usize, k: usize) -> Vec<u32> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .collect()
}

/// Down-up walks on `n`-subsets of `[N]`: for each `k` in `ks`, drop `k`
/// elements uniformly, then refill uniformly among the missing ones.
/// The metric is the overlap distance `d(X, Y) = n - |X intersect Y|`,
/// generated by single-swap edges. Each kernel is assembled as the exact
/// matrix product of its down and up phases.
pub fn build_nsets<S: Scalar>(
    big_n: usize,
    n: usize,
    ks: &[usize],
    theta: BlockWeights<S>,
) -> Result<ModelInstance<S>> {
    if n == 0 || n >= big_n {
        return Err(Error::usage(format!("need 1 <= n < N, got n = {n}, N = {big_n}")));
    }
    if big_n > 20 {
        return Err(Error::usage(format!("ground set size {big_n} out of supported range 2..=20")));
    }
    if ks.is_empty() || ks.len() != theta.len() {
        return Err(Error::usage(format!(
            "{} drop sizes with {} weights",
            ks.len(),
            theta.len()
        )));
    }
    if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::usage(format!("drop size {bad} out of 1..={n}")));
    }
    let states = enumerate_subsets(big_n, n);
    let total = states.len();
    check_footprint(total, ks.len())?;

    let labels: Vec<String> = states
        .iter()
        .map(|&m| {
            let elems: Vec<String> = (0..big_n)
                .filter(|&i| m & (1 << i) != 0)
                .map(|i| i.to_string())
                .collect();
            format!("{{{}}}", elems.join(","))
        })
        .collect();
    let space =
        FiniteSpace::with_labels(labels, vec![S::from_ratio(1, total as i64); total])?;

    let mut kernels = Vec::with_capacity(ks.len());
    for &k in ks {
        let keep = enumerate_subsets(big_n, n - k);
        let down_mass = S::from_ratio(1, binomial(n, k));
        let up_mass = S::from_ratio(1, binomial(big_n - (n - k), k));
        // Down phase: keep an (n-k)-subset of X, uniformly.
        let mut down = vec![S::zero(); total * keep.len()];
        for (x, &mx) in states.iter().enumerate() {
            for (z, &mz) in keep.iter().enumerate() {
                if mz & !mx == 0 {
                    down[x * keep.len() + z] = down_mass.clone();
                }
            }
        }
        // Up phase: extend the kept set by k fresh elements, uniformly.
        let mut up = vec![S::zero(); keep.len() * total];
        for (z, &mz) in keep.iter().enumerate() {
            for (y, &my) in states.iter().enumerate() {
                if mz & !my == 0 {
                    up[z * total + y] = up_mass.clone();
                }
            }
        }
        let mut rows = vec![S::zero(); total * total];
        for x in 0..total {
            for z in 0..keep.len() {
                let dm = &down[x * keep.len() + z];
                if *dm == S::zero() {
                    continue;
                }
                for y in 0..total {
                    let um = &up[z * total + y];
                    if *um == S::zero() {
                        continue;
                    }
                    rows[x * total + y] =
                        rows[x * total + y].clone() + dm.clone() * um.clone();
                }
            }
        }
        let rows: Vec<Vec<S>> = rows.chunks(total).map(<[S]>::to_vec).collect();
        kernels.push(MarkovKernel::from_rows(rows)?);
    }

    let dist_of = |x: usize, y: usize| n - (states[x] & states[y]).count_ones() as usize;
    let mut edges = Vec::new();
    for x in 0..total {
        for y in (x + 1)..total {
            if dist_of(x, y) == 1 {
                edges.push((x, y));
            }
        }
    }
    let metric = Metric::from_fn(total, |x, y| S::from_int(dist_of(x, y) as i64))?
        .with_generators(edges)?;

    Ok(ModelInstance {
        space,
        kernels,
        theta,
        metric,
    })
}

/// Closed-form contraction rate of the weighted down-up family:
/// `sum_k theta_k [ k/n + (k / (N - (n - k))) (1 - k/n) ]`.
pub fn downup_theoretical_kappa<S: Scalar>(
    big_n: usize,
    n: usize,
    ks: &[usize],
    theta: &BlockWeights<S>,
) -> Result<S> {
    if n == 0 || n >= big_n {
        return Err(Error::usage(format!("need 1 <= n < N, got n = {n}, N = {big_n}")));
    }
    if ks.len() != theta.len() {
        return Err(Error::usage("drop sizes and weights disagree"));
    }
    let mut acc = S::zero();
    for (&k, w) in ks.iter().zip(theta.weights()) {
        if k == 0 || k > n {
            return Err(Error::usage(format!("drop size {k} out of 1..={n}")));
        }
        let kn = S::from_ratio(k as i64, n as i64);
        let refill = S::from_ratio(k as i64, (big_n - (n - k)) as i64);
        let rate = kn.clone() + refill * (S::one() - kn);
        acc = acc + w.clone() * rate;
    }
    Ok(acc)
}
