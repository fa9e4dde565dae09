//! JSON wire formats for spaces, metrics, instances, and reports.
//!
//! Loaders treat everything on the wire as untrusted and re-run the
//! validation that the in-memory constructors perform: measures must
//! normalize, dense matrices must satisfy the triangle inequality,
//! kernels must preserve the measure, and edge lists must actually
//! generate the metric they claim to. Savers emit plain nested arrays
//! so reports diff cleanly.

use serde::{Deserialize, Serialize};

use crate::certify::{CertReport, PairMode};
use crate::error::{Error, Result};
use crate::estimate::{AscentConfig, EstimateReport};
use crate::family::BlockWeights;
use crate::gff::SigmaReport;
use crate::kernel::MarkovKernel;
use crate::metric::Metric;
use crate::models::ModelInstance;
use crate::scalar::Scalar;
use crate::space::FiniteSpace;
use crate::transport::TransportPlan;

/// Version stamp embedded in every top-level report.
pub const SCHEMA_VERSION: u32 = 1;

/// Probability space on the wire.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub p: Vec<f64>,
}

impl SpaceJson {
    pub fn from_space(space: &FiniteSpace<f64>) -> Self {
        SpaceJson {
            labels: Some(space.labels().to_vec()),
            p: space.p().to_vec(),
        }
    }

    pub fn to_space(&self) -> Result<FiniteSpace<f64>> {
        match &self.labels {
            Some(labels) => FiniteSpace::with_labels(labels.clone(), self.p.clone()),
            None => FiniteSpace::new(self.p.clone()),
        }
    }
}

/// Metric on the wire: a dense matrix, a weighted edge list, or both.
///
/// A dense matrix alone is verified in full. An edge list alone is
/// closed into its shortest-path metric and kept as the generator set.
/// When both are present the dense matrix wins and must be generated
/// by the edges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize, f64)>>,
}

impl MetricJson {
    pub fn from_metric(metric: &Metric<f64>) -> Self {
        let n = metric.len();
        let dense = (0..n)
            .map(|x| (0..n).map(|y| *metric.dist(x, y)).collect())
            .collect();
        let edges = metric
            .generators()
            .map(|gens| gens.iter().map(|&(a, b)| (a, b, *metric.dist(a, b))).collect());
        MetricJson {
            dense: Some(dense),
            edges,
        }
    }

    pub fn to_metric(&self) -> Result<Metric<f64>> {
        match (&self.dense, &self.edges) {
            (Some(rows), None) => Metric::new(rows.clone()),
            (Some(rows), Some(edges)) => {
                let metric = Metric::new(rows.clone())?
                    .with_generators(edges.iter().map(|&(a, b, _)| (a, b)).collect())?;
                metric.verify_generated()?;
                Ok(metric)
            }
            (None, Some(edges)) => metric_from_edges(edges),
            (None, None) => Err(Error::usage("metric needs a dense matrix or an edge list")),
        }
    }
}

/// Closes a weighted edge list into its shortest-path metric.
fn metric_from_edges(edges: &[(usize, usize, f64)]) -> Result<Metric<f64>> {
    if edges.is_empty() {
        return Err(Error::usage("metric edge list is empty"));
    }
    let mut n = 0;
    for &(a, b, w) in edges {
        if a == b {
            return Err(Error::usage(format!("metric edge ({a}, {a}) is a loop")));
        }
        if w <= 0.0 || !w.is_finite() {
            return Err(Error::domain(format!("edge ({a}, {b}) has weight {w}")));
        }
        n = n.max(a + 1).max(b + 1);
    }
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(a, b, w) in edges {
        if w < d[a][b] {
            d[a][b] = w;
            d[b][a] = w;
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
    for (i, row) in d.iter().enumerate() {
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain(format!(
                "edge graph leaves state {i} disconnected"
            )));
        }
    }
    let metric = Metric::new_unverified(d)?
        .with_generators(edges.iter().map(|&(a, b, _)| (a, b)).collect())?;
    metric.verify_generated()?;
    Ok(metric)
}

/// A complete certification input on the wire.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceJson {
    pub space: SpaceJson,
    /// Row-stochastic matrices, one per block kernel.
    pub kernels: Vec<Vec<Vec<f64>>>,
    pub theta: Vec<f64>,
    pub metric: MetricJson,
}

impl InstanceJson {
    pub fn from_instance(instance: &ModelInstance<f64>) -> Self {
        InstanceJson {
            space: SpaceJson::from_space(&instance.space),
            kernels: instance
                .kernels
                .iter()
                .map(|k| (0..k.len()).map(|x| k.row(x).to_vec()).collect())
                .collect(),
            theta: instance.theta.weights().to_vec(),
            metric: MetricJson::from_metric(&instance.metric),
        }
    }

    pub fn to_instance(&self) -> Result<ModelInstance<f64>> {
        let space = self.space.to_space()?;
        let metric = self.metric.to_metric()?;
        if metric.len() != space.len() {
            return Err(Error::usage(format!(
                "metric on {} states for a space of {}",
                metric.len(),
                space.len()
            )));
        }
        if self.kernels.is_empty() {
            return Err(Error::usage("instance has no kernels"));
        }
        let mut kernels = Vec::with_capacity(self.kernels.len());
        for (i, rows) in self.kernels.iter().enumerate() {
            let kernel = MarkovKernel::from_rows(rows.clone())?;
            if kernel.len() != space.len() {
                return Err(Error::usage(format!(
                    "kernel {i} acts on {} states, space has {}",
                    kernel.len(),
                    space.len()
                )));
            }
            if !kernel.is_stationary(&space, 1e-8) {
                return Err(Error::domain(format!(
                    "kernel {i} does not preserve the measure"
                )));
            }
            kernels.push(kernel);
        }
        let theta = BlockWeights::new(self.theta.clone())?;
        if theta.len() != kernels.len() {
            return Err(Error::usage(format!(
                "{} weights for {} kernels",
                theta.len(),
                kernels.len()
            )));
        }
        Ok(ModelInstance {
            space,
            kernels,
            theta,
            metric,
        })
    }
}

/// Certification outcome with state labels resolved and exact values
/// kept as strings when the run used rational arithmetic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertReportJson {
    pub kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_exact: Option<String>,
    pub ell: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell_exact: Option<Vec<String>>,
    pub worst_pair: (String, String),
    pub pair_mode: PairMode,
}

impl CertReportJson {
    pub fn from_report<S: Scalar>(report: &CertReport<S>, space: &FiniteSpace<S>) -> Self {
        let exact = S::exact();
        CertReportJson {
            kappa: report.kappa.to_f64(),
            kappa_exact: exact.then(|| report.kappa.to_string()),
            ell: report.ell.iter().map(Scalar::to_f64).collect(),
            ell_exact: exact.then(|| report.ell.iter().map(ToString::to_string).collect()),
            worst_pair: (
                space.label(report.worst_pair.0).to_string(),
                space.label(report.worst_pair.1).to_string(),
            ),
            pair_mode: report.pair_mode,
        }
    }
}

/// Estimator outcome plus the search configuration that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReportJson {
    pub rho_est: f64,
    pub spectral_factor: f64,
    pub witness_f: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub config: AscentConfig,
}

impl EstimateReportJson {
    pub fn from_report(report: &EstimateReport, config: &AscentConfig) -> Self {
        EstimateReportJson {
            rho_est: report.rho_est,
            spectral_factor: report.spectral_factor,
            witness_f: report.witness_f.values().to_vec(),
            iterations: report.iterations,
            converged: report.converged,
            config: config.clone(),
        }
    }
}

/// [`SigmaReport`] with the matrix flattened to rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SigmaReportJson {
    pub sigma_matrix: Vec<Vec<f64>>,
    pub sigma: f64,
    pub kappa_low: f64,
    pub kappa_high: f64,
}

impl SigmaReportJson {
    pub fn from_report(report: &SigmaReport) -> Self {
        SigmaReportJson {
            sigma_matrix: report
                .sigma_matrix
                .row_iter()
                .map(|row| row.iter().copied().collect())
                .collect(),
            sigma: report.sigma,
            kappa_low: report.kappa_low,
            kappa_high: report.kappa_high,
        }
    }
}

/// Transport outcome: the distance plus the coupling attaining it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanJson {
    pub cost: f64,
    /// Nonzero couplings as `(x, y, mass)`.
    pub entries: Vec<(usize, usize, f64)>,
}

impl PlanJson {
    pub fn new(cost: f64, plan: &TransportPlan<f64>) -> Self {
        PlanJson {
            cost,
            entries: plan.entries().to_vec(),
        }
    }
}
