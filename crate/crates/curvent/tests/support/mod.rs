//! Shared fixtures for the integration suites: independently written
//! transport oracles and the random rational metrics and measures that
//! feed them. The oracles deliberately avoid the algorithms the
//! library uses, so agreement is evidence rather than tautology.

use curvent::{Metric, Rat, Scalar, TransportPlan};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Minimizes `c . x` over `a x = b`, `x >= 0` with a dense tableau
/// and Bland's rule in both phases. Assumes the program is feasible
/// and bounded, which transportation programs always are.
pub fn simplex_min<S: Scalar>(a: &[Vec<S>], b: &[S], c: &[S]) -> S {
    let m = a.len();
    let nv = c.len();
    let mut tab: Vec<Vec<S>> = (0..m)
        .map(|i| {
            let mut row = a[i].clone();
            row.extend((0..m).map(|k| S::from_int((k == i) as i64)));
            row.push(b[i].clone());
            row
        })
        .collect();
    let mut basis: Vec<usize> = (nv..nv + m).collect();

    let phase1: Vec<S> = (0..nv + m)
        .map(|j| S::from_int((j >= nv) as i64))
        .collect();
    pivot_to_optimum(&mut tab, &mut basis, &phase1, nv + m);
    assert!(
        objective(&tab, &basis, &phase1) == S::from_int(0),
        "transportation program must be feasible"
    );

    // Drive any zero-level artificial out of the basis so phase two
    // cannot leave the original feasible region.
    for r in 0..m {
        if basis[r] >= nv {
            let j = (0..nv)
                .find(|&j| tab[r][j] != S::from_int(0))
                .expect("constraint rows are linearly independent");
            pivot(&mut tab, &mut basis, r, j);
        }
    }

    let mut phase2 = c.to_vec();
    phase2.extend((0..m).map(|_| S::from_int(0)));
    pivot_to_optimum(&mut tab, &mut basis, &phase2, nv);
    objective(&tab, &basis, &phase2)
}

fn objective<S: Scalar>(tab: &[Vec<S>], basis: &[usize], cost: &[S]) -> S {
    let rhs = tab[0].len() - 1;
    basis
        .iter()
        .zip(tab)
        .fold(S::from_int(0), |acc, (&bi, row)| {
            acc + cost[bi].clone() * row[rhs].clone()
        })
}

fn reduced_cost<S: Scalar>(tab: &[Vec<S>], basis: &[usize], cost: &[S], j: usize) -> S {
    basis.iter().zip(tab).fold(cost[j].clone(), |acc, (&bi, row)| {
        acc - cost[bi].clone() * row[j].clone()
    })
}

fn pivot_to_optimum<S: Scalar>(
    tab: &mut [Vec<S>],
    basis: &mut [usize],
    cost: &[S],
    allowed: usize,
) {
    let rhs = tab[0].len() - 1;
    loop {
        let entering =
            (0..allowed).find(|&j| reduced_cost(tab, basis, cost, j) < S::from_int(0));
        let Some(enter) = entering else { return };

        // Ratio test by cross-multiplication; ties fall to the row
        // holding the smallest basic index, completing Bland's rule.
        let mut leave: Option<usize> = None;
        for r in 0..tab.len() {
            if tab[r][enter] > S::from_int(0) {
                let better = match leave {
                    None => true,
                    Some(l) => {
                        let cur = tab[l][rhs].clone() * tab[r][enter].clone();
                        let new = tab[r][rhs].clone() * tab[l][enter].clone();
                        new < cur || (new == cur && basis[r] < basis[l])
                    }
                };
                if better {
                    leave = Some(r);
                }
            }
        }
        let leave = leave.expect("transportation program is bounded");
        pivot(tab, basis, leave, enter);
    }
}

fn pivot<S: Scalar>(tab: &mut [Vec<S>], basis: &mut [usize], r: usize, j: usize) {
    let div = tab[r][j].clone();
    for z in tab[r].iter_mut() {
        *z = z.clone() / div.clone();
    }
    let prow = tab[r].clone();
    for (i, row) in tab.iter_mut().enumerate() {
        if i == r || row[j] == S::from_int(0) {
            continue;
        }
        let f = row[j].clone();
        for (z, p) in row.iter_mut().zip(&prow) {
            *z = z.clone() - f.clone() * p.clone();
        }
    }
    basis[r] = j;
}

fn positive_support(weights: &[Rat]) -> Vec<usize> {
    (0..weights.len())
        .filter(|&i| weights[i] > Rat::from_int(0))
        .collect()
}

/// 1-Wasserstein value by solving the transportation linear program
/// outright: one variable per support pair, row-sum constraints for
/// every source, column sums for all but one sink (the dropped one is
/// implied, and keeping it would make the system rank deficient).
pub fn w1_oracle(metric: &Metric<Rat>, mu: &[Rat], nu: &[Rat]) -> Rat {
    let rows = positive_support(mu);
    let cols = positive_support(nu);
    let nv = rows.len() * cols.len();

    let mut a = Vec::with_capacity(rows.len() + cols.len() - 1);
    let mut b = Vec::with_capacity(rows.len() + cols.len() - 1);
    for (ri, &x) in rows.iter().enumerate() {
        let mut row = vec![Rat::from_int(0); nv];
        for ci in 0..cols.len() {
            row[ri * cols.len() + ci] = Rat::from_int(1);
        }
        a.push(row);
        b.push(mu[x]);
    }
    for (ci, &y) in cols.iter().enumerate().take(cols.len() - 1) {
        let mut row = vec![Rat::from_int(0); nv];
        for ri in 0..rows.len() {
            row[ri * cols.len() + ci] = Rat::from_int(1);
        }
        a.push(row);
        b.push(nu[y]);
    }
    let c: Vec<Rat> = rows
        .iter()
        .flat_map(|&x| cols.iter().map(move |&y| *metric.dist(x, y)))
        .collect();
    simplex_min(&a, &b, &c)
}

/// Bottleneck value as the smallest distance threshold whose bipartite
/// graph passes the Gale-Hoffman test: no set of sources may demand
/// more mass than the sinks it can reach within the threshold hold.
pub fn winf_oracle(metric: &Metric<Rat>, mu: &[Rat], nu: &[Rat]) -> Rat {
    let rows = positive_support(mu);
    let cols = positive_support(nu);
    let mut thresholds: Vec<Rat> = rows
        .iter()
        .flat_map(|&x| cols.iter().map(move |&y| *metric.dist(x, y)))
        .collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).expect("distances are ordered"));
    thresholds.dedup();

    thresholds
        .into_iter()
        .find(|t| {
            (1u32..1 << rows.len()).all(|set| {
                let demand = rows
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| set >> i & 1 == 1)
                    .fold(Rat::from_int(0), |acc, (_, &x)| acc + mu[x]);
                let reach = cols
                    .iter()
                    .filter(|&&y| {
                        rows.iter()
                            .enumerate()
                            .any(|(i, &x)| set >> i & 1 == 1 && *metric.dist(x, y) <= *t)
                    })
                    .fold(Rat::from_int(0), |acc, &y| acc + nu[y]);
                demand <= reach
            })
        })
        .expect("the largest candidate admits the complete bipartite coupling")
}

/// Symmetric rational matrix with off-diagonal entries in `[1, 2]`,
/// where the triangle inequality holds term by term.
#[allow(clippy::needless_range_loop)]
pub fn boxed_metric(rng: &mut ChaCha8Rng, n: usize) -> Metric<Rat> {
    let mut d = vec![vec![Rat::from_int(0); n]; n];
    for x in 0..n {
        for y in (x + 1)..n {
            let e = Rat::from_int(1) + Rat::from_ratio(rng.random_range(0..=8), 8);
            d[x][y] = e;
            d[y][x] = e;
        }
    }
    Metric::new(d).expect("entries in [1, 2] form a metric")
}

/// Shortest-path closure of a complete graph with random rational
/// weights, for metrics with nontrivial geodesics.
#[allow(clippy::needless_range_loop)]
pub fn closure_metric(rng: &mut ChaCha8Rng, n: usize) -> Metric<Rat> {
    let mut d = vec![vec![Rat::from_int(0); n]; n];
    for x in 0..n {
        for y in (x + 1)..n {
            let e = Rat::from_ratio(rng.random_range(1..=12), 4);
            d[x][y] = e;
            d[y][x] = e;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    Metric::new(d).expect("shortest-path closure is a metric")
}

/// Random rational measure from small integer masses; zero entries are
/// common, so strict sub-supports get exercised.
pub fn random_measure(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rat> {
    loop {
        let masses: Vec<i64> = (0..n).map(|_| rng.random_range(0..=4)).collect();
        let total: i64 = masses.iter().sum();
        if total > 0 {
            return masses
                .into_iter()
                .map(|m| Rat::from_ratio(m, total))
                .collect();
        }
    }
}

pub fn check_marginals(plan: &TransportPlan<Rat>, mu: &[Rat], nu: &[Rat]) {
    let mut row = vec![Rat::from_int(0); mu.len()];
    let mut col = vec![Rat::from_int(0); nu.len()];
    for &(x, y, m) in plan.entries() {
        assert!(m > Rat::from_int(0), "plan carries a non-positive mass");
        row[x] += m;
        col[y] += m;
    }
    assert_eq!(row, mu);
    assert_eq!(col, nu);
}

/// Runs both solvers on one instance and checks them against the
/// oracles: exact agreement and valid plans in rational arithmetic,
/// then the float pipeline within `1e-10` of the exact values.
pub fn check_against_oracles(metric: &Metric<Rat>, mu: &[Rat], nu: &[Rat], label: &str) {
    let (w1_val, plan) = curvent::w1(metric, mu, nu).unwrap();
    assert_eq!(w1_val, w1_oracle(metric, mu, nu), "{label}");
    check_marginals(&plan, mu, nu);
    assert_eq!(plan.cost(metric), w1_val, "{label}");

    let (winf_val, bottleneck_plan) = curvent::winf(metric, mu, nu).unwrap();
    assert_eq!(winf_val, winf_oracle(metric, mu, nu), "{label}");
    check_marginals(&bottleneck_plan, mu, nu);
    let bottleneck = bottleneck_plan
        .entries()
        .iter()
        .map(|&(x, y, _)| *metric.dist(x, y))
        .fold(Rat::from_int(0), |a, d| if d > a { d } else { a });
    assert_eq!(bottleneck, winf_val, "{label}");
    assert!(w1_val <= winf_val, "{label}");

    let fmetric = metric.to_f64();
    let fmu: Vec<f64> = mu.iter().map(Scalar::to_f64).collect();
    let fnu: Vec<f64> = nu.iter().map(Scalar::to_f64).collect();
    let (w1_float, _) = curvent::w1(&fmetric, &fmu, &fnu).unwrap();
    assert!(
        (w1_float - w1_val.to_f64()).abs() <= 1e-10,
        "{label}: float {} vs exact {}",
        w1_float,
        w1_val
    );
    let (winf_float, _) = curvent::winf(&fmetric, &fmu, &fnu).unwrap();
    assert!(
        (winf_float - winf_val.to_f64()).abs() <= 1e-10,
        "{label}: float {} vs exact {}",
        winf_float,
        winf_val
    );
}

/// One random instance per call: alternating metric construction, a
/// shared-measure case every seventeenth trial.
pub fn random_transport_case(
    rng: &mut ChaCha8Rng,
    trial: usize,
) -> (Metric<Rat>, Vec<Rat>, Vec<Rat>) {
    let n = rng.random_range(2..=6);
    let metric = if trial.is_multiple_of(2) {
        boxed_metric(rng, n)
    } else {
        closure_metric(rng, n)
    };
    let mu = random_measure(rng, n);
    let nu = if trial.is_multiple_of(17) {
        mu.clone()
    } else {
        random_measure(rng, n)
    };
    (metric, mu, nu)
}
