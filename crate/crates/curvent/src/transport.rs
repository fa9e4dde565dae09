//! Wasserstein distances between probability vectors on a finite metric
//! space: `W1` by min-cost flow and `W_inf` by threshold search.
//!
//! `W1` reduces to a transportation problem on the residuals
//! `(mu - nu)_+` and `(nu - mu)_+` (shared mass ships in place for free;
//! for the 1-Wasserstein distance this loses nothing because the value
//! depends on `mu - nu` only). The flow itself is successive shortest
//! augmenting paths with node potentials, so every Dijkstra pass runs on
//! nonnegative reduced costs.
//!
//! `W_inf` is the smallest `t` such that all mass can be matched across
//! pairs at distance `<= t`. Candidate values of `t` are the distances
//! between the two supports; feasibility at each candidate is a
//! bipartite max-flow check, and the search is binary. No residual
//! reduction applies here: forcing shared mass to stay in place can
//! strictly worsen the bottleneck.
//!
//! Both solvers are generic over [`Scalar`]. Over rationals every
//! comparison is exact and the returned values are exact; over `f64` the
//! feasibility checks carry the scalar's comparison slack.

use crate::error::{Error, Result};
use crate::metric::Metric;
use crate::scalar::Scalar;

/// Sparse coupling between two probability vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan<S: Scalar = f64> {
    entries: Vec<(usize, usize, S)>,
}

impl<S: Scalar> TransportPlan<S> {
    pub fn entries(&self) -> &[(usize, usize, S)] {
        &self.entries
    }

    /// `sum gamma(x, y) d(x, y)` over the plan.
    pub fn cost(&self, metric: &Metric<S>) -> S {
        self.entries.iter().fold(S::zero(), |acc, (x, y, m)| {
            acc + m.clone() * metric.dist(*x, *y).clone()
        })
    }

    /// Largest distance carrying positive mass.
    pub fn max_dist(&self, metric: &Metric<S>) -> S {
        let mut best = S::zero();
        for (x, y, m) in &self.entries {
            if *m > S::zero() && *metric.dist(*x, *y) > best {
                best = metric.dist(*x, *y).clone();
            }
        }
        best
    }

    /// Checks that the plan's marginals are `mu` and `nu` within `tol`.
    pub fn verify_marginals(&self, mu: &[S], nu: &[S], tol: &S) -> Result<()> {
        let mut left = vec![S::zero(); mu.len()];
        let mut right = vec![S::zero(); nu.len()];
        for (x, y, m) in &self.entries {
            if *m < S::zero() {
                return Err(Error::domain("coupling has a negative entry"));
            }
            left[*x] = left[*x].clone() + m.clone();
            right[*y] = right[*y].clone() + m.clone();
        }
        for x in 0..mu.len() {
            if (left[x].clone() - mu[x].clone()).abs() > *tol {
                return Err(Error::contract(format!("left marginal off at state {x}")));
            }
        }
        for y in 0..nu.len() {
            if (right[y].clone() - nu[y].clone()).abs() > *tol {
                return Err(Error::contract(format!("right marginal off at state {y}")));
            }
        }
        Ok(())
    }
}

fn check_probability_vector<S: Scalar>(v: &[S], n: usize, name: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::usage(format!(
            "{name} has {} entries on a {n}-state metric",
            v.len()
        )));
    }
    for (i, x) in v.iter().enumerate() {
        match x.partial_cmp(&S::zero()) {
            Some(std::cmp::Ordering::Less) | None => {
                return Err(Error::domain(format!("{name}[{i}] is not a nonnegative number")));
            }
            _ => {}
        }
    }
    let sum = v.iter().fold(S::zero(), |a, b| a + b.clone());
    let ok = if S::exact() {
        sum == S::one()
    } else {
        (sum.to_f64() - 1.0).abs() <= crate::space::NORMALIZATION_TOL
    };
    if !ok {
        return Err(Error::domain(format!("{name} sums to {sum}, not 1")));
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Min-cost flow: successive shortest augmenting paths with potentials.
// ---------------------------------------------------------------------

struct FlowEdge<S> {
    to: usize,
    cap: S,
    cost: S,
}

struct MinCostFlow<S: Scalar> {
    adj: Vec<Vec<usize>>,
    edges: Vec<FlowEdge<S>>,
}

impl<S: Scalar> MinCostFlow<S> {
    fn new(n: usize) -> Self {
        MinCostFlow {
            adj: vec![Vec::new(); n],
            edges: Vec::new(),
        }
    }

    fn add_edge(&mut self, u: usize, v: usize, cap: S, cost: S) -> usize {
        let id = self.edges.len();
        self.adj[u].push(id);
        self.edges.push(FlowEdge {
            to: v,
            cap,
            cost: cost.clone(),
        });
        self.adj[v].push(id + 1);
        self.edges.push(FlowEdge {
            to: u,
            cap: S::zero(),
            cost: -cost,
        });
        id
    }

    /// Flow pushed through forward edge `id` so far.
    fn flow(&self, id: usize) -> S {
        self.edges[id ^ 1].cap.clone()
    }

    /// Sends as much flow as possible from `s` to `t`, returning the
    /// total amount. Dijkstra is the quadratic variant; the graphs here
    /// are small and dense.
    fn run(&mut self, s: usize, t: usize) -> S {
        let n = self.adj.len();
        let tol = S::default_tol();
        let mut potential = vec![S::zero(); n];
        let mut total = S::zero();
        loop {
            let mut dist: Vec<Option<S>> = vec![None; n];
            let mut prev_edge = vec![usize::MAX; n];
            let mut done = vec![false; n];
            dist[s] = Some(S::zero());
            loop {
                let mut u = usize::MAX;
                for v in 0..n {
                    if done[v] || dist[v].is_none() {
                        continue;
                    }
                    if u == usize::MAX || dist[v] < dist[u] {
                        u = v;
                    }
                }
                if u == usize::MAX {
                    break;
                }
                done[u] = true;
                let du = dist[u].clone().unwrap();
                for &eid in &self.adj[u] {
                    let e = &self.edges[eid];
                    if e.cap <= tol || done[e.to] {
                        continue;
                    }
                    let mut rc =
                        e.cost.clone() + potential[u].clone() - potential[e.to].clone();
                    // Reduced costs are nonnegative up to roundoff; clamp
                    // the float dust so Dijkstra's invariant holds.
                    if rc < S::zero() {
                        rc = S::zero();
                    }
                    let cand = du.clone() + rc;
                    if dist[e.to].is_none() || Some(&cand) < dist[e.to].as_ref() {
                        dist[e.to] = Some(cand);
                        prev_edge[e.to] = eid;
                    }
                }
            }
            if dist[t].is_none() {
                return total;
            }
            for v in 0..n {
                if let Some(d) = &dist[v] {
                    potential[v] = potential[v].clone() + d.clone();
                }
            }
            // Bottleneck along the augmenting path.
            let mut push = None::<S>;
            let mut v = t;
            while v != s {
                let eid = prev_edge[v];
                let cap = self.edges[eid].cap.clone();
                push = Some(match push {
                    Some(p) if p < cap => p,
                    _ => cap,
                });
                v = self.edges[eid ^ 1].to;
            }
            let push = push.expect("augmenting path is nonempty");
            let mut v = t;
            while v != s {
                let eid = prev_edge[v];
                self.edges[eid].cap = self.edges[eid].cap.clone() - push.clone();
                self.edges[eid ^ 1].cap = self.edges[eid ^ 1].cap.clone() + push.clone();
                v = self.edges[eid ^ 1].to;
            }
            total = total + push;
        }
    }
}

/// 1-Wasserstein distance and an optimal coupling.
pub fn w1<S: Scalar>(
    metric: &Metric<S>,
    mu: &[S],
    nu: &[S],
) -> Result<(S, TransportPlan<S>)> {
    let n = metric.len();
    check_probability_vector(mu, n, "mu")?;
    check_probability_vector(nu, n, "nu")?;

    let mut entries = Vec::new();
    let mut residual_mu = Vec::new();
    let mut residual_nu = Vec::new();
    for x in 0..n {
        let shared = if mu[x] < nu[x] { mu[x].clone() } else { nu[x].clone() };
        if shared > S::zero() {
            entries.push((x, x, shared.clone()));
        }
        let left = mu[x].clone() - shared.clone();
        let right = nu[x].clone() - shared;
        if left > S::zero() {
            residual_mu.push((x, left));
        }
        if right > S::zero() {
            residual_nu.push((x, right));
        }
    }
    if residual_mu.is_empty() {
        return Ok((S::zero(), TransportPlan { entries }));
    }

    let ns = residual_mu.len();
    let nt = residual_nu.len();
    let total = residual_mu
        .iter()
        .fold(S::zero(), |a, (_, m)| a + m.clone());
    // Nodes: 0 = source, 1..=ns sources, ns+1..=ns+nt sinks, last = sink.
    let src = 0;
    let dst = ns + nt + 1;
    let mut net = MinCostFlow::new(ns + nt + 2);
    for (i, (_, m)) in residual_mu.iter().enumerate() {
        net.add_edge(src, 1 + i, m.clone(), S::zero());
    }
    let mut pair_edges = Vec::with_capacity(ns * nt);
    for (i, (x, _)) in residual_mu.iter().enumerate() {
        for (j, (y, _)) in residual_nu.iter().enumerate() {
            let id = net.add_edge(1 + i, 1 + ns + j, total.clone(), metric.dist(*x, *y).clone());
            pair_edges.push((id, *x, *y));
        }
    }
    for (j, (_, m)) in residual_nu.iter().enumerate() {
        net.add_edge(1 + ns + j, dst, m.clone(), S::zero());
    }

    let sent = net.run(src, dst);
    if (sent.clone() - total.clone()).abs() > S::default_tol() {
        return Err(Error::numerical(format!(
            "transport network moved {sent} of {total} mass"
        )));
    }
    let mut value = S::zero();
    for (id, x, y) in pair_edges {
        let f = net.flow(id);
        if f > S::zero() {
            value = value + f.clone() * metric.dist(x, y).clone();
            entries.push((x, y, f));
        }
    }
    Ok((value, TransportPlan { entries }))
}

// ---------------------------------------------------------------------
// Bottleneck matching: binary search over thresholds with max-flow
// feasibility.
// ---------------------------------------------------------------------

struct Dinic<S: Scalar> {
    adj: Vec<Vec<usize>>,
    edges: Vec<(usize, S)>, // (to, remaining capacity)
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl<S: Scalar> Dinic<S> {
    fn new(n: usize) -> Self {
        Dinic {
            adj: vec![Vec::new(); n],
            edges: Vec::new(),
            level: vec![0; n],
            iter: vec![0; n],
        }
    }

    fn add_edge(&mut self, u: usize, v: usize, cap: S) -> usize {
        let id = self.edges.len();
        self.adj[u].push(id);
        self.edges.push((v, cap));
        self.adj[v].push(id + 1);
        self.edges.push((u, S::zero()));
        id
    }

    fn flow(&self, id: usize) -> S {
        self.edges[id ^ 1].1.clone()
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        let tol = S::default_tol();
        self.level.iter_mut().for_each(|l| *l = -1);
        let mut queue = std::collections::VecDeque::new();
        self.level[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &eid in &self.adj[u] {
                let (to, ref cap) = self.edges[eid];
                if *cap > tol && self.level[to] < 0 {
                    self.level[to] = self.level[u] + 1;
                    queue.push_back(to);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, limit: S) -> S {
        if u == t {
            return limit;
        }
        let tol = S::default_tol();
        while self.iter[u] < self.adj[u].len() {
            let eid = self.adj[u][self.iter[u]];
            let (to, cap) = (self.edges[eid].0, self.edges[eid].1.clone());
            if cap > tol && self.level[to] == self.level[u] + 1 {
                let pass = if limit < cap { limit.clone() } else { cap };
                let got = self.dfs(to, t, pass);
                if got > tol {
                    self.edges[eid].1 = self.edges[eid].1.clone() - got.clone();
                    self.edges[eid ^ 1].1 = self.edges[eid ^ 1].1.clone() + got.clone();
                    return got;
                }
            }
            self.iter[u] += 1;
        }
        S::zero()
    }

    fn run(&mut self, s: usize, t: usize, cap_bound: S) -> S {
        let tol = S::default_tol();
        let mut total = S::zero();
        while self.bfs(s, t) {
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let got = self.dfs(s, t, cap_bound.clone());
                if got <= tol {
                    break;
                }
                total = total + got;
            }
        }
        total
    }
}

/// Max-flow feasibility of matching all mass across pairs at distance
/// `<= t`; on success returns the witness plan.
fn winf_feasible<S: Scalar>(
    metric: &Metric<S>,
    mu_supp: &[(usize, S)],
    nu_supp: &[(usize, S)],
    t: &S,
) -> Option<TransportPlan<S>> {
    let ns = mu_supp.len();
    let nt = nu_supp.len();
    let src = 0;
    let dst = ns + nt + 1;
    let slack = S::default_tol();
    let mut net = Dinic::new(ns + nt + 2);
    let total = mu_supp.iter().fold(S::zero(), |a, (_, m)| a + m.clone());
    for (i, (_, m)) in mu_supp.iter().enumerate() {
        net.add_edge(src, 1 + i, m.clone());
    }
    let mut pair_edges = Vec::new();
    for (i, (x, _)) in mu_supp.iter().enumerate() {
        for (j, (y, _)) in nu_supp.iter().enumerate() {
            if *metric.dist(*x, *y) <= t.clone() + slack.clone() {
                let id = net.add_edge(1 + i, 1 + ns + j, total.clone());
                pair_edges.push((id, *x, *y));
            }
        }
    }
    for (j, (_, m)) in nu_supp.iter().enumerate() {
        net.add_edge(1 + ns + j, dst, m.clone());
    }
    let sent = net.run(src, dst, total.clone());
    if (total - sent).abs() > slack {
        return None;
    }
    let mut entries = Vec::new();
    for (id, x, y) in pair_edges {
        let f = net.flow(id);
        if f > S::zero() {
            entries.push((x, y, f));
        }
    }
    Some(TransportPlan { entries })
}

/// Infinity-Wasserstein distance (the optimal coupling bottleneck) and a
/// witness coupling attaining it.
pub fn winf<S: Scalar>(
    metric: &Metric<S>,
    mu: &[S],
    nu: &[S],
) -> Result<(S, TransportPlan<S>)> {
    let n = metric.len();
    check_probability_vector(mu, n, "mu")?;
    check_probability_vector(nu, n, "nu")?;
    let mu_supp: Vec<(usize, S)> = (0..n)
        .filter(|&x| mu[x] > S::zero())
        .map(|x| (x, mu[x].clone()))
        .collect();
    let nu_supp: Vec<(usize, S)> = (0..n)
        .filter(|&y| nu[y] > S::zero())
        .map(|y| (y, nu[y].clone()))
        .collect();

    let mut candidates: Vec<S> = Vec::with_capacity(mu_supp.len() * nu_supp.len());
    for (x, _) in &mu_supp {
        for (y, _) in &nu_supp {
            candidates.push(metric.dist(*x, *y).clone());
        }
    }
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("distances are ordered"));
    candidates.dedup();

    // Binary search for the smallest feasible threshold; the largest
    // candidate admits the complete bipartite graph and is always
    // feasible.
    let mut lo = 0usize;
    let mut hi = candidates.len() - 1;
    let mut best = winf_feasible(metric, &mu_supp, &nu_supp, &candidates[hi])
        .ok_or_else(|| Error::numerical("bottleneck matching infeasible at the diameter"))?;
    while lo < hi {
        let mid = (lo + hi) / 2;
        match winf_feasible(metric, &mu_supp, &nu_supp, &candidates[mid]) {
            Some(plan) => {
                best = plan;
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    Ok((candidates[lo].clone(), best))
}
