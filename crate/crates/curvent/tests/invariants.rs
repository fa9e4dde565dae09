//! Randomized structural invariants: entropy inequalities that hold for
//! every stationary kernel, metric axioms of the transport distances,
//! agreement between the certifier's pair modes, and the ordering of
//! the coverage constants. Each property states a fact the rest of the
//! workspace silently relies on.

use curvent::{
    build_product, certify_kappa, conditional_kernel, entropy, variance_contraction_spectral, w1,
    winf, BlockFamily, BlockWeights, Density, FiniteSpace, MarkovKernel, Metric, PairMode, Rat,
    Scalar,
};
use proptest::prelude::*;

fn space_strategy(n: usize) -> impl Strategy<Value = FiniteSpace<f64>> {
    prop::collection::vec(1u32..=20, n).prop_map(|masses| {
        let total: f64 = masses.iter().map(|&m| f64::from(m)).sum();
        FiniteSpace::new(masses.iter().map(|&m| f64::from(m) / total).collect()).unwrap()
    })
}

fn measure_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u32..=6, n)
        .prop_filter("a measure needs mass", |m| m.iter().sum::<u32>() > 0)
        .prop_map(|masses| {
            let total: f64 = masses.iter().map(|&m| f64::from(m)).sum();
            masses.iter().map(|&m| f64::from(m) / total).collect()
        })
}

fn density_strategy(n: usize) -> impl Strategy<Value = Density<f64>> {
    prop::collection::vec(0u32..=32, n)
        .prop_filter("a density needs mass", |v| v.iter().any(|&x| x > 0))
        .prop_map(|v| Density::new(v.into_iter().map(|x| f64::from(x) / 4.0).collect()).unwrap())
}

/// Symmetric matrix with off-diagonal entries on a grid inside `[1, 2]`,
/// which satisfies the triangle inequality term by term.
#[allow(clippy::needless_range_loop)]
fn metric_strategy(n: usize) -> impl Strategy<Value = Metric<f64>> {
    prop::collection::vec(0u32..=8, n * (n - 1) / 2).prop_map(move |ks| {
        let mut d = vec![vec![0.0; n]; n];
        let mut it = ks.into_iter();
        for x in 0..n {
            for y in (x + 1)..n {
                let e = 1.0 + f64::from(it.next().unwrap()) / 8.0;
                d[x][y] = e;
                d[y][x] = e;
            }
        }
        Metric::new(d).unwrap()
    })
}

fn family_strategy(n_sites: usize) -> impl Strategy<Value = BlockFamily<f64>> {
    let full = (1u32 << n_sites) - 1;
    prop::collection::btree_set(1..=full, 1..=(full as usize).min(6)).prop_flat_map(
        move |blocks| {
            let blocks: Vec<u32> = blocks.into_iter().collect();
            let m = blocks.len();
            prop::collection::vec(1i64..=8, m).prop_map(move |masses| {
                let theta = BlockWeights::from_integers(&masses).unwrap();
                BlockFamily::new(n_sites, blocks.clone(), theta).unwrap()
            })
        },
    )
}

/// Metropolis chain for `p` under the uniform proposal: reversible, so
/// stationary, and generically dense.
fn metropolis(space: &FiniteSpace<f64>) -> MarkovKernel<f64> {
    let n = space.len();
    let p = space.p();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|x| {
            let mut row = vec![0.0; n];
            let mut off = 0.0;
            for y in 0..n {
                if y != x {
                    row[y] = p[y].min(p[x]) / (p[x] * n as f64);
                    off += row[y];
                }
            }
            row[x] = 1.0 - off;
            row
        })
        .collect();
    MarkovKernel::from_rows(rows).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn stationary_averaging_never_creates_entropy(
        (space, f, cells) in (2usize..=7).prop_flat_map(|n| {
            (space_strategy(n), density_strategy(n), prop::collection::vec(0..n, n))
        })
    ) {
        let base = entropy(&space, &f).unwrap();

        let walk = metropolis(&space);
        let walked = Density::new(walk.apply(f.values())).unwrap();
        prop_assert!(entropy(&space, &walked).unwrap() <= base + 1e-12);

        let condition = conditional_kernel(&space, &cells).unwrap();
        let conditioned = Density::new(condition.apply(f.values())).unwrap();
        prop_assert!(entropy(&space, &conditioned).unwrap() <= base + 1e-12);
    }

    #[test]
    fn bottleneck_dominates_average_transport(
        (metric, mu, nu) in (2usize..=6).prop_flat_map(|n| {
            (metric_strategy(n), measure_strategy(n), measure_strategy(n))
        })
    ) {
        let (w1_val, _) = w1(&metric, &mu, &nu).unwrap();
        let (winf_val, _) = winf(&metric, &mu, &nu).unwrap();
        prop_assert!(w1_val <= winf_val + 1e-12);

        let (w1_rev, _) = w1(&metric, &nu, &mu).unwrap();
        let (winf_rev, _) = winf(&metric, &nu, &mu).unwrap();
        prop_assert!((w1_val - w1_rev).abs() <= 1e-12);
        prop_assert!((winf_val - winf_rev).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn transport_distances_satisfy_the_triangle_inequality(
        (metric, mu, nu, rho) in (2usize..=6).prop_flat_map(|n| {
            (
                metric_strategy(n),
                measure_strategy(n),
                measure_strategy(n),
                measure_strategy(n),
            )
        })
    ) {
        let (direct, _) = w1(&metric, &mu, &nu).unwrap();
        let (leg_a, _) = w1(&metric, &mu, &rho).unwrap();
        let (leg_b, _) = w1(&metric, &rho, &nu).unwrap();
        prop_assert!(direct <= leg_a + leg_b + 1e-9);

        let (direct_inf, _) = winf(&metric, &mu, &nu).unwrap();
        let (leg_a_inf, _) = winf(&metric, &mu, &rho).unwrap();
        let (leg_b_inf, _) = winf(&metric, &rho, &nu).unwrap();
        prop_assert!(direct_inf <= leg_a_inf + leg_b_inf + 1e-9);
    }

    #[test]
    fn entropy_decomposes_through_conditional_expectations(
        (space, f, cells) in (2usize..=7).prop_flat_map(|n| {
            (space_strategy(n), density_strategy(n), prop::collection::vec(0..n, n))
        })
    ) {
        let n = space.len();
        let p = space.p();
        let ncells = cells.iter().max().unwrap() + 1;

        let mut within = 0.0;
        for c in 0..ncells {
            let members: Vec<usize> = (0..n).filter(|&x| cells[x] == c).collect();
            if members.is_empty() {
                continue;
            }
            let mass: f64 = members.iter().map(|&x| p[x]).sum();
            let cell_space =
                FiniteSpace::new(members.iter().map(|&x| p[x] / mass).collect()).unwrap();
            let cell_f =
                Density::new(members.iter().map(|&x| f.values()[x]).collect()).unwrap();
            within += mass * entropy(&cell_space, &cell_f).unwrap();
        }

        let condition = conditional_kernel(&space, &cells).unwrap();
        let between = entropy(
            &space,
            &Density::new(condition.apply(f.values())).unwrap(),
        )
        .unwrap();
        let total = entropy(&space, &f).unwrap();
        prop_assert!(
            (total - (within + between)).abs() <= 1e-10,
            "chain rule gap: {total} vs {within} + {between}"
        );
    }

    #[test]
    fn adjoint_is_an_involution(
        space in (2usize..=7).prop_flat_map(space_strategy)
    ) {
        let walk = metropolis(&space);
        let back = walk.adjoint(&space).unwrap().adjoint(&space).unwrap();
        for x in 0..space.len() {
            for y in 0..space.len() {
                prop_assert!((walk.transition(x, y) - back.transition(x, y)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn pair_coverage_never_exceeds_site_coverage(
        family in (2usize..=5).prop_flat_map(family_strategy)
    ) {
        let pair = family.theta_star_star().unwrap();
        prop_assert!(pair <= family.theta_star() + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generator_certificates_match_exhaustive_on_product_models(
        family in (2usize..=3).prop_flat_map(family_strategy)
    ) {
        let sizes = vec![2usize; family.n_sites()];
        let instance = build_product(&sizes, &family).unwrap();
        let exhaustive = certify_kappa(
            &instance.space,
            &instance.kernels,
            &instance.theta,
            &instance.metric,
            PairMode::Exhaustive,
        )
        .unwrap();
        let edges = certify_kappa(
            &instance.space,
            &instance.kernels,
            &instance.theta,
            &instance.metric,
            PairMode::GeneratorEdges,
        )
        .unwrap();
        prop_assert!(exhaustive.kappa <= edges.kappa + 1e-12);
        prop_assert!(
            (exhaustive.kappa - edges.kappa).abs() <= 1e-9,
            "pair modes disagree: {} vs {}",
            exhaustive.kappa,
            edges.kappa
        );
    }

    #[test]
    fn rational_and_float_certificates_agree(
        (blocks, masses) in prop::collection::btree_set(1u32..=7, 1..=4).prop_flat_map(|blocks| {
            let m = blocks.len();
            (Just(blocks.into_iter().collect::<Vec<u32>>()), prop::collection::vec(1i64..=8, m))
        })
    ) {
        let exact_family = BlockFamily::new(
            3,
            blocks.clone(),
            BlockWeights::<Rat>::from_integers(&masses).unwrap(),
        )
        .unwrap();
        let exact = build_product(&[2, 2, 2], &exact_family).unwrap();
        let cert = certify_kappa(
            &exact.space,
            &exact.kernels,
            &exact.theta,
            &exact.metric,
            PairMode::Exhaustive,
        )
        .unwrap();

        let float = exact.to_f64();
        let fcert = certify_kappa(
            &float.space,
            &float.kernels,
            &float.theta,
            &float.metric,
            PairMode::Exhaustive,
        )
        .unwrap();
        prop_assert!(
            (cert.kappa.to_f64() - fcert.kappa).abs() <= 1e-9,
            "rational {} vs float {}",
            cert.kappa,
            fcert.kappa
        );
    }

    #[test]
    fn certificate_and_spectral_factor_sandwich_one(
        family in (2usize..=3).prop_flat_map(family_strategy)
    ) {
        let sizes = vec![2usize; family.n_sites()];
        let instance = build_product(&sizes, &family).unwrap();
        let cert = certify_kappa(
            &instance.space,
            &instance.kernels,
            &instance.theta,
            &instance.metric,
            PairMode::Exhaustive,
        )
        .unwrap();
        let spectral =
            variance_contraction_spectral(&instance.space, &instance.kernels, &instance.theta)
                .unwrap();
        prop_assert!(
            cert.kappa + spectral <= 1.0 + 1e-9,
            "kappa {} + spectral {} exceeds one",
            cert.kappa,
            spectral
        );
    }
}
