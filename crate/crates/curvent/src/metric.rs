//! Metrics on finite spaces, with optional generating edge sets.
//!
//! The certifier ranges over pairs of states; for path metrics it is
//! enough (and much cheaper) to range over a generating set of edges,
//! because both Wasserstein distances it bounds are subadditive along
//! geodesics. A [`Metric`] therefore carries an optional list of
//! generator edges, and [`Metric::verify_generated`] checks the claim
//! that shortest-path distances through those edges reproduce the matrix.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Finite metric: symmetric positive matrix with zero diagonal satisfying
/// the triangle inequality, plus an optional generating edge set.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric<S: Scalar = f64> {
    n: usize,
    d: Vec<S>,
    generators: Option<Vec<(usize, usize)>>,
}

impl<S: Scalar> Metric<S> {
    /// Builds a metric and verifies all axioms including the full
    /// `O(n^3)` triangle inequality sweep.
    pub fn new(matrix: Vec<Vec<S>>) -> Result<Self> {
        let m = Self::new_unverified(matrix)?;
        m.verify_triangle()?;
        Ok(m)
    }

    /// Builds a metric checking symmetry, positivity and the zero
    /// diagonal but skipping the cubic triangle sweep. For matrices that
    /// are path metrics by construction; everything else should go
    /// through [`Metric::new`].
    pub fn new_unverified(matrix: Vec<Vec<S>>) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::domain("metric must have at least one point"));
        }
        let mut d = Vec::with_capacity(n * n);
        for (x, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::domain(format!(
                    "metric row {x} has {} entries for {n} points",
                    row.len()
                )));
            }
            d.extend(row.iter().cloned());
        }
        for x in 0..n {
            if d[x * n + x] != S::zero() {
                return Err(Error::domain(format!("nonzero diagonal at state {x}")));
            }
            for y in 0..x {
                if d[x * n + y] != d[y * n + x] {
                    return Err(Error::domain(format!("asymmetric at ({x}, {y})")));
                }
                if d[x * n + y] <= S::zero() {
                    return Err(Error::domain(format!(
                        "distance between distinct states {x}, {y} must be positive"
                    )));
                }
            }
        }
        Ok(Metric {
            n,
            d,
            generators: None,
        })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> S) -> Result<Self> {
        Self::new_unverified((0..n).map(|x| (0..n).map(|y| f(x, y)).collect()).collect())
    }

    /// Checks `d(x, z) <= d(x, y) + d(y, z)` on all triples, with the
    /// scalar's comparison slack.
    pub fn verify_triangle(&self) -> Result<()> {
        let tol = S::default_tol();
        for x in 0..self.n {
            for y in 0..self.n {
                if y == x {
                    continue;
                }
                let dxy = self.dist(x, y).clone();
                for z in 0..self.n {
                    let lhs = self.dist(x, z).clone();
                    let rhs = dxy.clone() + self.dist(y, z).clone() + tol.clone();
                    if lhs > rhs {
                        return Err(Error::domain(format!(
                            "triangle inequality fails: d({x},{z}) > d({x},{y}) + d({y},{z})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Attaches a generating edge set (unordered pairs of distinct
    /// states).
    pub fn with_generators(mut self, edges: Vec<(usize, usize)>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::usage("generator edge set must be nonempty"));
        }
        let mut seen = std::collections::HashSet::new();
        let mut cleaned = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a >= self.n || b >= self.n {
                return Err(Error::usage(format!(
                    "generator edge ({a}, {b}) out of range for {} states",
                    self.n
                )));
            }
            if a == b {
                return Err(Error::usage(format!("generator edge ({a}, {a}) is a loop")));
            }
            let e = (a.min(b), a.max(b));
            if seen.insert(e) {
                cleaned.push(e);
            }
        }
        self.generators = Some(cleaned);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dist(&self, x: usize, y: usize) -> &S {
        &self.d[x * self.n + y]
    }

    pub fn generators(&self) -> Option<&[(usize, usize)]> {
        self.generators.as_deref()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        if let Some(edges) = &self.generators {
            for &(a, b) in edges {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        adj
    }

    /// Shortest path from `x` to `y` through generator edges, weighting
    /// each edge by its distance. Plain `O(n^2)` Dijkstra; path lengths
    /// here are small.
    pub fn shortest_path(&self, x: usize, y: usize) -> Result<Vec<usize>> {
        if self.generators.is_none() {
            return Err(Error::usage("metric has no generator edges"));
        }
        let adj = self.adjacency();
        let mut dist: Vec<Option<S>> = vec![None; self.n];
        let mut prev = vec![usize::MAX; self.n];
        let mut done = vec![false; self.n];
        dist[x] = Some(S::zero());
        loop {
            let mut u = usize::MAX;
            for v in 0..self.n {
                if done[v] || dist[v].is_none() {
                    continue;
                }
                if u == usize::MAX || dist[v] < dist[u] {
                    u = v;
                }
            }
            if u == usize::MAX {
                return Err(Error::domain(format!(
                    "generator graph does not connect states {x} and {y}"
                )));
            }
            if u == y {
                break;
            }
            done[u] = true;
            let du = dist[u].clone().unwrap();
            for &v in &adj[u] {
                if done[v] {
                    continue;
                }
                let cand = du.clone() + self.dist(u, v).clone();
                if dist[v].is_none() || Some(&cand) < dist[v].as_ref() {
                    dist[v] = Some(cand);
                    prev[v] = u;
                }
            }
        }
        let mut path = vec![y];
        let mut cur = y;
        while cur != x {
            cur = prev[cur];
            path.push(cur);
        }
        path.reverse();
        Ok(path)
    }

    /// Verifies that shortest-path distances through the generator edges
    /// reproduce the metric, which is what generator-mode certification
    /// relies on. Quadratic Dijkstra from every source.
    pub fn verify_generated(&self) -> Result<()> {
        if self.generators.is_none() {
            return Err(Error::usage("metric has no generator edges"));
        }
        let adj = self.adjacency();
        let tol = S::default_tol();
        for src in 0..self.n {
            let mut dist: Vec<Option<S>> = vec![None; self.n];
            let mut done = vec![false; self.n];
            dist[src] = Some(S::zero());
            for _ in 0..self.n {
                let mut u = usize::MAX;
                for v in 0..self.n {
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
                for &v in &adj[u] {
                    let cand = du.clone() + self.dist(u, v).clone();
                    if dist[v].is_none() || Some(&cand) < dist[v].as_ref() {
                        dist[v] = Some(cand);
                    }
                }
            }
            for (y, entry) in dist.iter().enumerate() {
                let sp = entry.clone().ok_or_else(|| {
                    Error::domain(format!("generator graph disconnects state {y} from {src}"))
                })?;
                let gap = (sp - self.dist(src, y).clone()).abs();
                if gap > tol {
                    return Err(Error::domain(format!(
                        "metric is not generated by its edges: mismatch at ({src}, {y})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_f64(&self) -> Metric<f64> {
        Metric {
            n: self.n,
            d: self.d.iter().map(Scalar::to_f64).collect(),
            generators: self.generators.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rat;

    fn line_metric(n: usize) -> Metric<f64> {
        Metric::from_fn(n, |x, y| (x as f64 - y as f64).abs()).unwrap()
    }

    #[test]
    fn rejects_non_metrics() {
        // Asymmetry.
        assert!(Metric::new(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        // Nonzero diagonal.
        assert!(Metric::new(vec![vec![1.0, 1.0], vec![1.0, 0.0]]).is_err());
        // Zero distance between distinct states.
        assert!(Metric::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).is_err());
        // Triangle violation: d(0,2) = 5 > 1 + 1.
        let bad = vec![
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ];
        assert!(Metric::new(bad.clone()).is_err());
        assert!(Metric::new_unverified(bad).unwrap().verify_triangle().is_err());
    }

    #[test]
    fn line_metric_generated_by_consecutive_edges() {
        let m = line_metric(6)
            .with_generators((0..5).map(|i| (i, i + 1)).collect())
            .unwrap();
        m.verify_generated().unwrap();
        let path = m.shortest_path(0, 5).unwrap();
        assert_eq!(path, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn sparse_generators_that_do_not_generate_are_caught() {
        let m = line_metric(4).with_generators(vec![(0, 3), (1, 2)]).unwrap();
        assert!(m.verify_generated().is_err());
    }

    #[test]
    fn generator_validation() {
        assert!(line_metric(3).with_generators(vec![(0, 3)]).is_err());
        assert!(line_metric(3).with_generators(vec![(1, 1)]).is_err());
        assert!(line_metric(3).with_generators(vec![]).is_err());
        // Duplicates collapse.
        let m = line_metric(3)
            .with_generators(vec![(0, 1), (1, 0), (1, 2)])
            .unwrap();
        assert_eq!(m.generators().unwrap().len(), 2);
    }

    #[test]
    fn exact_triangle_check_over_rationals() {
        let one = Rat::from_int(1);
        let two = Rat::from_int(2);
        let zero = Rat::from_int(0);
        let m = Metric::new(vec![
            vec![zero, one, two],
            vec![one, zero, one],
            vec![two, one, zero],
        ])
        .unwrap();
        assert_eq!(*m.dist(0, 2), Rat::from_int(2));
    }
}
