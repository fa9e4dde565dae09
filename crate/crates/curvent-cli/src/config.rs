//! Experiment configuration: the one file format every `run` consumes.
//!
//! TOML is the primary format, JSON an alternative keyed off the file
//! extension. Parse errors surface the offending field through the
//! underlying deserializer; semantic errors (a task that does not fit
//! the model kind, a bad block pattern) are caught by [`ExperimentConfig::validate`]
//! or at model-building time, all before any computation starts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Tasks to execute; the runner orders them by dependency, not by
    /// their position here.
    pub tasks: Vec<Task>,
    pub model: ModelDescriptor,
    /// Report destination. Stdout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub options: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Certify,
    Estimate,
    Spectral,
    Duality,
    CurvatureGff,
    SphereCheck,
    Langevin,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Certify => "certify",
            Task::Estimate => "estimate",
            Task::Spectral => "spectral",
            Task::Duality => "duality",
            Task::CurvatureGff => "curvature-gff",
            Task::SphereCheck => "sphere-check",
            Task::Langevin => "langevin",
        }
    }

    fn applies_to(self, model: &ModelDescriptor) -> bool {
        let chain = matches!(
            model,
            ModelDescriptor::Product { .. }
                | ModelDescriptor::Nsets { .. }
                | ModelDescriptor::Permutations { .. }
        );
        match self {
            Task::Certify | Task::Estimate | Task::Spectral | Task::Duality => chain,
            Task::CurvatureGff => matches!(model, ModelDescriptor::Gff { .. }),
            Task::SphereCheck => matches!(model, ModelDescriptor::Sphere { .. }),
            Task::Langevin => matches!(model, ModelDescriptor::Langevin { .. }),
        }
    }
}

/// What to build. Finite chains (`product`, `nsets`, `permutations`)
/// feed the certify/estimate/duality pipeline; the other kinds each
/// carry their own single task.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelDescriptor {
    Product {
        /// Shorthand for `sizes = [2; n]`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sizes: Option<Vec<usize>>,
        #[serde(default)]
        blocks: BlocksSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<Vec<f64>>,
    },
    Nsets {
        #[serde(rename = "N")]
        big_n: usize,
        n: usize,
        k: KSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<Vec<f64>>,
    },
    Permutations {
        n: usize,
        #[serde(default)]
        blocks: BlocksSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<Vec<f64>>,
    },
    Gff {
        /// Dense coupling matrix, given inline.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<Vec<Vec<f64>>>,
        /// Dense coupling matrix, read from a JSON file.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<PathBuf>,
        /// Box side lengths; builds the nearest-neighbour matrix.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lattice: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hop: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        blocks: Option<BlocksSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<Vec<f64>>,
    },
    Sphere {
        n: usize,
        p: f64,
        #[serde(default)]
        blocks: BlocksSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<Vec<f64>>,
    },
    Langevin {
        potential: String,
        rho: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slope: Option<f64>,
        #[serde(default = "default_x0")]
        x0: Vec<f64>,
        #[serde(default = "default_y0")]
        y0: Vec<f64>,
    },
}

fn default_x0() -> Vec<f64> {
    vec![1.0]
}

fn default_y0() -> Vec<f64> {
    vec![-1.0]
}

impl ModelDescriptor {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelDescriptor::Product { .. } => "product",
            ModelDescriptor::Nsets { .. } => "nsets",
            ModelDescriptor::Permutations { .. } => "permutations",
            ModelDescriptor::Gff { .. } => "gff",
            ModelDescriptor::Sphere { .. } => "sphere",
            ModelDescriptor::Langevin { .. } => "langevin",
        }
    }
}

/// One drop size or several, matched positionally with `theta`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSpec {
    One(usize),
    Many(Vec<usize>),
}

impl KSpec {
    pub fn list(&self) -> Vec<usize> {
        match self {
            KSpec::One(k) => vec![*k],
            KSpec::Many(ks) => ks.clone(),
        }
    }
}

/// Either a named pattern or an explicit list of site groups.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BlocksSpec {
    Pattern(String),
    Explicit(Vec<Vec<usize>>),
}

impl Default for BlocksSpec {
    fn default() -> Self {
        BlocksSpec::Pattern("singletons".to_owned())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub estimate: u64,
    pub duality: u64,
    pub curvature: u64,
    pub sphere: u64,
    pub langevin: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            estimate: 0x5eed,
            duality: 0xd0a1,
            curvature: 0xcafe,
            sphere: 0x57a7,
            langevin: 0xd1f5,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Slack against closed-form certificate values.
    pub closed_form: f64,
    /// Allowed excess of `kappa + rho_est` over one.
    pub sandwich: f64,
    /// Allowed excess of `kappa + spectral factor` over one.
    pub spectral: f64,
    /// Ceiling on the worst exponential-moment violation.
    pub duality: f64,
    /// Ceiling on distorted-curvature violations.
    pub curvature: f64,
    /// Slack for the resampling ratio against its coverage ceiling.
    pub sphere: f64,
    /// How far the fitted contraction rate may fall below convexity.
    pub rate_slack: f64,
    /// Multiplier on the exponential envelope for entropy estimates.
    pub envelope_factor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            closed_form: 1e-9,
            sandwich: 1e-6,
            spectral: 1e-9,
            duality: 1e-10,
            curvature: 1e-9,
            sphere: 1e-9,
            rate_slack: 0.05,
            envelope_factor: 1.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CertMode {
    Exhaustive,
    Edges,
}

impl CertMode {
    pub fn pair_mode(self) -> curvent::PairMode {
        match self {
            CertMode::Exhaustive => curvent::PairMode::Exhaustive,
            CertMode::Edges => curvent::PairMode::GeneratorEdges,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// Pair set for certification.
    pub mode: CertMode,
    /// Certify over exact rationals; requires integer `theta`.
    pub rational: bool,
    pub restarts: usize,
    pub max_iters: usize,
    pub step: f64,
    pub ascent_tol: f64,
    /// Random exponent draws for the duality check.
    pub trials: usize,
    /// Gaussian draws per block for the curvature check.
    pub z_samples: usize,
    /// Random sphere pairs per sweep.
    pub pairs: usize,
    pub dt: f64,
    pub t_end: f64,
    pub particles: usize,
    pub bins: usize,
    /// Times at which to estimate entropy; empty skips that stage.
    pub grid: Vec<f64>,
    /// Initial law for the entropy stage.
    pub start_mean: f64,
    pub start_sd: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy_csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sphere_csv: Option<PathBuf>,
}

impl Default for Options {
    fn default() -> Self {
        let ascent = curvent::AscentConfig::default();
        Options {
            mode: CertMode::Exhaustive,
            rational: false,
            restarts: ascent.restarts,
            max_iters: ascent.max_iters,
            step: ascent.step,
            ascent_tol: ascent.tol,
            trials: 1000,
            z_samples: 10_000,
            pairs: 100_000,
            dt: 1e-3,
            t_end: 5.0,
            particles: 100_000,
            bins: 80,
            grid: Vec::new(),
            start_mean: 2.0,
            start_sd: 1.0,
            distance_csv: None,
            entropy_csv: None,
            sphere_csv: None,
        }
    }
}

impl Options {
    pub fn ascent(&self, seed: u64) -> curvent::AscentConfig {
        curvent::AscentConfig {
            restarts: self.restarts,
            max_iters: self.max_iters,
            step: self.step,
            tol: self.ascent_tol,
            seed,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let json = path
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("json"));
        let config: ExperimentConfig = if json {
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        };
        config.validate()?;
        Ok(config)
    }

    /// Structural checks that need no model building: a nonempty task
    /// list, every task compatible with the model kind, and the block
    /// family present where a task requires one.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.tasks.is_empty() {
            return Err(CliError::Config("tasks: at least one task is required".into()));
        }
        for task in &self.tasks {
            if !task.applies_to(&self.model) {
                return Err(CliError::Config(format!(
                    "tasks: \"{}\" does not apply to model kind \"{}\"",
                    task.name(),
                    self.model.kind_name()
                )));
            }
        }
        if self.tasks.contains(&Task::CurvatureGff) {
            if let ModelDescriptor::Gff { blocks: None, .. } = &self.model {
                return Err(CliError::Config(
                    "model.blocks: required for the curvature-gff task".into(),
                ));
            }
        }
        Ok(())
    }
}
