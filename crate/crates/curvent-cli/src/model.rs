//! Turns model descriptors into library objects: block families from
//! patterns or explicit site lists, chains with the floor their
//! certificate is checked against, fields, sphere families, and
//! diffusion potentials.

use std::fs;

use curvent::{
    build_gff, build_nsets, build_permutations, build_product, downup_theoretical_kappa,
    lattice_delta, BlockFamily, BlockWeights, GffInstance, LatticeDelta, ModelInstance, Potential,
    Quadratic, QuadraticLogCosh, Scalar,
};

use crate::config::{BlocksSpec, ModelDescriptor};
use crate::CliError;

/// A finite chain plus the closed-form value its certificate must meet.
pub struct BuiltChain<S: Scalar> {
    pub inst: ModelInstance<S>,
    pub floor: Floor,
}

/// How the certified constant relates to the model's known value.
#[derive(Clone, Copy)]
pub enum Floor {
    /// Certificate equals the coverage floor exactly.
    Coverage(f64),
    /// Certificate stays at or above the pair coverage floor.
    PairCoverage(f64),
    /// Certificate stays at or above the exchange closed form.
    ClosedForm(f64),
}

pub fn build_chain<S: Scalar>(desc: &ModelDescriptor) -> Result<BuiltChain<S>, CliError> {
    match desc {
        ModelDescriptor::Product { n, sizes, blocks, theta } => {
            let sizes = match (sizes, n) {
                (Some(sizes), _) => sizes.clone(),
                (None, Some(n)) => vec![2; *n],
                (None, None) => {
                    return Err(CliError::Config(
                        "model: a product needs either n or sizes".into(),
                    ))
                }
            };
            let family: BlockFamily<S> = family_from(blocks, sizes.len(), theta)?;
            let floor = Floor::Coverage(family.theta_star().to_f64());
            let inst = build_product(&sizes, &family)?;
            Ok(BuiltChain { inst, floor })
        }
        ModelDescriptor::Nsets { big_n, n, k, theta } => {
            let ks = k.list();
            let weights: BlockWeights<S> = weights_from(theta, ks.len())?;
            let closed = downup_theoretical_kappa(*big_n, *n, &ks, &weights)?.to_f64();
            let inst = build_nsets(*big_n, *n, &ks, weights)?;
            Ok(BuiltChain { inst, floor: Floor::ClosedForm(closed) })
        }
        ModelDescriptor::Permutations { n, blocks, theta } => {
            let family: BlockFamily<S> = family_from(blocks, *n, theta)?;
            let floor = Floor::PairCoverage(family.theta_star_star()?.to_f64());
            let inst = build_permutations(*n, &family)?;
            Ok(BuiltChain { inst, floor })
        }
        other => Err(CliError::Config(format!(
            "model kind \"{}\" does not define a finite chain",
            other.kind_name()
        ))),
    }
}

/// A field instance with the optional extras a descriptor can request.
pub struct BuiltField {
    pub instance: GffInstance,
    /// Present when the matrix came from box dimensions.
    pub lattice: Option<LatticeDelta>,
    pub family: Option<BlockFamily<f64>>,
}

pub fn build_field(desc: &ModelDescriptor) -> Result<BuiltField, CliError> {
    let ModelDescriptor::Gff { p, matrix, lattice, hop, blocks, theta } = desc else {
        return Err(CliError::Config(format!(
            "model kind \"{}\" does not define a field",
            desc.kind_name()
        )));
    };
    let (rows, delta) = if let Some(rows) = p {
        (rows.clone(), None)
    } else if let Some(path) = matrix {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let rows: Vec<Vec<f64>> = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        (rows, None)
    } else if let Some(dims) = lattice {
        let hop = hop.ok_or_else(|| {
            CliError::Config("model.hop: required alongside model.lattice".into())
        })?;
        (box_matrix(dims, hop), Some(lattice_delta(dims, hop)?))
    } else {
        return Err(CliError::Config(
            "model: a field needs p, matrix, or lattice".into(),
        ));
    };
    let instance = build_gff(&rows)?;
    let family = blocks
        .as_ref()
        .map(|spec| family_from(spec, instance.n(), theta))
        .transpose()?;
    Ok(BuiltField { instance, lattice: delta, family })
}

/// Nearest-neighbour coupling on a box with the given side lengths,
/// every edge weighted `hop`. Sites are indexed with the last axis
/// varying fastest; the spectrum does not depend on that choice.
fn box_matrix(dims: &[usize], hop: f64) -> Vec<Vec<f64>> {
    let total: usize = dims.iter().product();
    let mut rows = vec![vec![0.0; total]; total];
    let mut strides = vec![1usize; dims.len()];
    for axis in (0..dims.len().saturating_sub(1)).rev() {
        strides[axis] = strides[axis + 1] * dims[axis + 1];
    }
    for site in 0..total {
        for (&len, &stride) in dims.iter().zip(&strides) {
            let coord = (site / stride) % len;
            if coord + 1 < len {
                rows[site][site + stride] = hop;
                rows[site + stride][site] = hop;
            }
        }
    }
    rows
}

pub fn build_sphere(desc: &ModelDescriptor) -> Result<(BlockFamily<f64>, f64), CliError> {
    let ModelDescriptor::Sphere { n, p, blocks, theta } = desc else {
        return Err(CliError::Config(format!(
            "model kind \"{}\" does not define a sphere sweep",
            desc.kind_name()
        )));
    };
    Ok((family_from(blocks, *n, theta)?, *p))
}

/// Potential dispatch for the two named families.
#[derive(Clone, Copy)]
pub enum BuiltPotential {
    Quad(Quadratic),
    Bent(QuadraticLogCosh),
}

impl BuiltPotential {
    pub fn rho(&self) -> f64 {
        match self {
            BuiltPotential::Quad(q) => q.rho(),
            BuiltPotential::Bent(b) => b.rho(),
        }
    }
}

pub struct BuiltDiffusion {
    pub potential: BuiltPotential,
    pub name: String,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
}

pub fn build_diffusion(desc: &ModelDescriptor) -> Result<BuiltDiffusion, CliError> {
    let ModelDescriptor::Langevin { potential, rho, slope, x0, y0 } = desc else {
        return Err(CliError::Config(format!(
            "model kind \"{}\" does not define a diffusion",
            desc.kind_name()
        )));
    };
    let built = match potential.as_str() {
        "quadratic" => BuiltPotential::Quad(Quadratic { rho: *rho }),
        "quadratic-plus-logcosh" => BuiltPotential::Bent(QuadraticLogCosh {
            rho: *rho,
            slope: slope.unwrap_or(1.0),
        }),
        other => {
            return Err(CliError::Config(format!(
                "model.potential: unknown potential \"{other}\" \
                 (expected \"quadratic\" or \"quadratic-plus-logcosh\")"
            )))
        }
    };
    Ok(BuiltDiffusion {
        potential: built,
        name: potential.clone(),
        x0: x0.clone(),
        y0: y0.clone(),
    })
}

pub fn family_from<S: Scalar>(
    spec: &BlocksSpec,
    n_sites: usize,
    theta: &Option<Vec<f64>>,
) -> Result<BlockFamily<S>, CliError> {
    let masks = masks_from(spec, n_sites)?;
    let weights = weights_from(theta, masks.len())?;
    Ok(BlockFamily::new(n_sites, masks, weights)?)
}

fn masks_from(spec: &BlocksSpec, n_sites: usize) -> Result<Vec<u32>, CliError> {
    if n_sites == 0 || n_sites > 20 {
        return Err(CliError::Config(format!(
            "model: {n_sites} sites outside the supported range 1..=20"
        )));
    }
    match spec {
        BlocksSpec::Pattern(name) => masks_for_pattern(name.trim(), n_sites),
        BlocksSpec::Explicit(groups) => {
            let mut masks = Vec::with_capacity(groups.len());
            for (pos, group) in groups.iter().enumerate() {
                if group.is_empty() {
                    return Err(CliError::Config(format!("model.blocks[{pos}]: empty block")));
                }
                let mut mask = 0u32;
                for &site in group {
                    if site >= n_sites {
                        return Err(CliError::Config(format!(
                            "model.blocks[{pos}]: site index {site} exceeds the {n_sites} available"
                        )));
                    }
                    mask |= 1 << site;
                }
                masks.push(mask);
            }
            Ok(masks)
        }
    }
}

fn masks_for_pattern(name: &str, n_sites: usize) -> Result<Vec<u32>, CliError> {
    let size_of = |mask: u32| mask.count_ones() as usize;
    match name {
        "singletons" => Ok((0..n_sites).map(|i| 1u32 << i).collect()),
        "pairs" => size_filtered(n_sites, 2, size_of),
        "all-but-one" => {
            let full = (1u32 << n_sites) - 1;
            Ok((0..n_sites).map(|i| full ^ (1 << i)).collect())
        }
        other => {
            if let Some(rest) = other.strip_prefix("size-") {
                let ell: usize = rest.parse().map_err(|_| {
                    CliError::Config(format!(
                        "model.blocks: \"{other}\" has no block size after \"size-\""
                    ))
                })?;
                size_filtered(n_sites, ell, size_of)
            } else {
                Err(CliError::Config(format!(
                    "model.blocks: unknown pattern \"{other}\" (expected \"singletons\", \
                     \"pairs\", \"all-but-one\", \"size-<l>\", or an explicit list)"
                )))
            }
        }
    }
}

fn size_filtered(
    n_sites: usize,
    ell: usize,
    size_of: impl Fn(u32) -> usize,
) -> Result<Vec<u32>, CliError> {
    if ell == 0 || ell > n_sites {
        return Err(CliError::Config(format!(
            "model.blocks: block size {ell} outside 1..={n_sites}"
        )));
    }
    let full = (1u32 << n_sites) - 1;
    Ok((1..=full).filter(|&m| size_of(m) == ell).collect())
}

/// Uniform when absent. Exact scalars insist on integer weights so the
/// normalization stays exact and the masses stay small; floats accept
/// any nonnegative weights, normalized through a 1e12 grid whose
/// rounding error is far below every tolerance in play.
fn weights_from<S: Scalar>(
    theta: &Option<Vec<f64>>,
    count: usize,
) -> Result<BlockWeights<S>, CliError> {
    let Some(raw) = theta else {
        return Ok(BlockWeights::uniform(count)?);
    };
    if raw.len() != count {
        return Err(CliError::Config(format!(
            "model.theta: {} weights for {count} blocks",
            raw.len()
        )));
    }
    if raw.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(CliError::Config(
            "model.theta: weights must be finite and nonnegative".into(),
        ));
    }
    let masses: Vec<i64> = if S::exact() {
        raw.iter()
            .map(|&w| {
                if w.fract() != 0.0 || w > 1e15 {
                    Err(CliError::Config(format!(
                        "model.theta: rational mode needs integer weights, got {w}"
                    )))
                } else {
                    Ok(w as i64)
                }
            })
            .collect::<Result<_, _>>()?
    } else {
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Err(CliError::Config("model.theta: weights sum to zero".into()));
        }
        raw.iter().map(|&w| (w / sum * 1e12).round() as i64).collect()
    };
    Ok(BlockWeights::from_integers(&masses)?)
}
