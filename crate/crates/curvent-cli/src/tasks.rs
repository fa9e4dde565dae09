//! Executes the tasks of an experiment in dependency order and folds
//! everything into one report: the echoed configuration, one section
//! per task, and the list of assertion outcomes the exit code hangs on.
//!
//! Wall-clock data lives in a separate `meta` object so that two runs
//! of the same configuration produce byte-identical reports once that
//! object is dropped.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use curvent::{
    bl_duality_check, certify_kappa, check_distorted_curvature, contraction_check,
    contraction_lower_bound, coupled_paths, decay_rate_fit, entropy_decay_estimate, estimate_rho,
    gaussian_sampler, glauber_constants, lambda_upper_linear, variance_contraction_spectral,
    CertReportJson, CurvatureReport, DualityReport, EntropyCurve, EstimateReportJson,
    GlauberConstants, LatticeDelta, Rat, Scalar, SphereReport, SCHEMA_VERSION,
};

use crate::config::{ExperimentConfig, Task};
use crate::model::{self, BuiltChain, BuiltPotential, Floor};
use crate::{emit, CliError};

/// One checked invariant. `name` is stable and machine-matchable;
/// `detail` carries the numbers behind the verdict.
#[derive(Debug, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(assertions: &mut Vec<Assertion>, name: &str, passed: bool, detail: String) {
    assertions.push(Assertion { name: name.to_owned(), passed, detail });
}

/// Task sections, present exactly for what the configuration enabled.
#[derive(Debug, Default, Serialize)]
pub struct Results {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertReportJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateReportJson>,
    /// Second-largest eigenvalue of the averaged two-step kernel.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duality: Option<DualityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sphere: Option<SphereReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub langevin: Option<LangevinSection>,
}

#[derive(Debug, Serialize)]
pub struct FieldSection {
    pub n: usize,
    pub delta_min: f64,
    pub glauber: GlauberConstants,
    /// Rayleigh quotient of the linearized map at the positive witness.
    pub linear_upper: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeDelta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage_lower_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curvature: Option<CurvatureReport>,
}

#[derive(Debug, Serialize)]
pub struct LangevinSection {
    pub potential: String,
    pub rho: f64,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub fitted_rate: f64,
    pub initial_distance: f64,
    pub final_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diverged_at: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy: Option<EntropyCurve>,
}

#[derive(Serialize)]
struct ReportBody<'a> {
    schema_version: u32,
    config: &'a ExperimentConfig,
    results: &'a Results,
    assertions: &'a [Assertion],
}

#[derive(Serialize)]
struct Meta {
    unix_time_s: u64,
    elapsed_ms: u128,
}

#[derive(Serialize)]
struct Report<'a> {
    #[serde(flatten)]
    body: ReportBody<'a>,
    meta: Meta,
}

pub struct RunOutcome {
    /// The full report, pretty-printed with a trailing newline.
    pub json: String,
    /// `name: detail` lines for every failed assertion.
    pub failed: Vec<String>,
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    config.validate()?;
    let clock = Instant::now();
    let mut results = Results::default();
    let mut assertions = Vec::new();
    match config.model.kind_name() {
        "product" | "nsets" | "permutations" => {
            chain_tasks(config, &mut results, &mut assertions)?
        }
        "gff" => field_tasks(config, &mut results, &mut assertions)?,
        "sphere" => sphere_tasks(config, &mut results, &mut assertions)?,
        "langevin" => langevin_tasks(config, &mut results, &mut assertions)?,
        other => return Err(CliError::Config(format!("model: unknown kind \"{other}\""))),
    }
    let failed = assertions
        .iter()
        .filter(|a| !a.passed)
        .map(|a| format!("{}: {}", a.name, a.detail))
        .collect();
    let unix_time_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let report = Report {
        body: ReportBody {
            schema_version: SCHEMA_VERSION,
            config,
            results: &results,
            assertions: &assertions,
        },
        meta: Meta { unix_time_s, elapsed_ms: clock.elapsed().as_millis() },
    };
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Config(format!("report serialization: {e}")))?;
    json.push('\n');
    Ok(RunOutcome { json, failed })
}

/// Certify, then the estimates that compare against the certificate.
/// Certification always runs for a chain model because every other
/// chain task consumes its constant.
pub fn chain_tasks(
    config: &ExperimentConfig,
    results: &mut Results,
    assertions: &mut Vec<Assertion>,
) -> Result<(), CliError> {
    let opts = &config.options;
    let tol = &config.tolerances;
    let has = |t: Task| config.tasks.contains(&t);
    let mode = opts.mode.pair_mode();

    let chain: BuiltChain<f64> = model::build_chain(&config.model)?;
    let kappa = if opts.rational {
        let exact: BuiltChain<Rat> = model::build_chain(&config.model)?;
        let inst = &exact.inst;
        let cert = certify_kappa(&inst.space, &inst.kernels, &inst.theta, &inst.metric, mode)?;
        results.certify = Some(CertReportJson::from_report(&cert, &inst.space));
        cert.kappa.to_f64()
    } else {
        let inst = &chain.inst;
        let cert = certify_kappa(&inst.space, &inst.kernels, &inst.theta, &inst.metric, mode)?;
        results.certify = Some(CertReportJson::from_report(&cert, &inst.space));
        cert.kappa
    };

    if has(Task::Certify) {
        match chain.floor {
            Floor::Coverage(floor) => check(
                assertions,
                "certify.coverage-floor",
                (kappa - floor).abs() <= tol.closed_form,
                format!("kappa {kappa} against coverage floor {floor}"),
            ),
            Floor::PairCoverage(floor) => check(
                assertions,
                "certify.pair-floor",
                kappa >= floor - tol.closed_form,
                format!("kappa {kappa} against pair coverage floor {floor}"),
            ),
            Floor::ClosedForm(floor) => check(
                assertions,
                "certify.closed-form-floor",
                kappa >= floor - tol.closed_form,
                format!("kappa {kappa} against exchange closed form {floor}"),
            ),
        }
    }

    let inst = &chain.inst;
    if has(Task::Estimate) {
        let ascent = opts.ascent(config.seeds.estimate);
        let report = estimate_rho(&inst.space, &inst.kernels, &inst.theta, &ascent)?;
        check(
            assertions,
            "estimate.sandwich",
            kappa + report.rho_est <= 1.0 + tol.sandwich,
            format!("kappa {kappa} + rho_est {} against 1", report.rho_est),
        );
        results.estimate = Some(EstimateReportJson::from_report(&report, &ascent));
    }
    if has(Task::Spectral) {
        let factor = variance_contraction_spectral(&inst.space, &inst.kernels, &inst.theta)?;
        check(
            assertions,
            "spectral.sandwich",
            kappa + factor <= 1.0 + tol.spectral,
            format!("kappa {kappa} + spectral factor {factor} against 1"),
        );
        results.spectral = Some(factor);
    }
    if has(Task::Duality) {
        let report = bl_duality_check(
            &inst.space,
            &inst.kernels,
            &inst.theta,
            kappa,
            opts.trials,
            config.seeds.duality,
        )?;
        check(
            assertions,
            "duality.violation",
            report.max_violation <= tol.duality,
            format!("worst exponential-moment violation {:e}", report.max_violation),
        );
        results.duality = Some(report);
    }
    Ok(())
}

pub fn field_tasks(
    config: &ExperimentConfig,
    results: &mut Results,
    assertions: &mut Vec<Assertion>,
) -> Result<(), CliError> {
    let built = model::build_field(&config.model)?;
    let inst = &built.instance;
    let mut section = FieldSection {
        n: inst.n(),
        delta_min: inst.delta_min(),
        glauber: glauber_constants(inst),
        linear_upper: lambda_upper_linear(inst),
        lattice: built.lattice,
        coverage_lower_bound: None,
        curvature: None,
    };
    if config.tasks.contains(&Task::CurvatureGff) {
        let family = built.family.as_ref().ok_or_else(|| {
            CliError::Config("model.blocks: required for the curvature-gff task".into())
        })?;
        section.coverage_lower_bound = Some(contraction_lower_bound(inst, family)?);
        let report = check_distorted_curvature(
            inst,
            family,
            config.options.z_samples,
            config.seeds.curvature,
        )?;
        let tol = config.tolerances.curvature;
        check(
            assertions,
            "curvature.block",
            report.max_block_violation <= tol,
            format!("worst per-block violation {:e}", report.max_block_violation),
        );
        check(
            assertions,
            "curvature.aggregate",
            report.max_aggregate_violation <= tol,
            format!("worst aggregate violation {:e}", report.max_aggregate_violation),
        );
        section.curvature = Some(report);
    }
    results.field = Some(section);
    Ok(())
}

pub fn sphere_tasks(
    config: &ExperimentConfig,
    results: &mut Results,
    assertions: &mut Vec<Assertion>,
) -> Result<(), CliError> {
    let (family, p) = model::build_sphere(&config.model)?;
    let report = contraction_check(&family, p, config.options.pairs, config.seeds.sphere)?;
    if config.tasks.contains(&Task::SphereCheck) {
        let tol = config.tolerances.sphere;
        check(
            assertions,
            "sphere.ceiling",
            report.max_ratio <= report.bound + tol,
            format!("max ratio {} against ceiling {}", report.max_ratio, report.bound),
        );
        check(
            assertions,
            "sphere.canonical",
            (report.canonical_ratio - report.bound).abs() <= tol,
            format!("canonical ratio {} against ceiling {}", report.canonical_ratio, report.bound),
        );
    }
    if let Some(path) = &config.options.sphere_csv {
        emit::write_file(path, &emit::sphere_csv(&report.canonical_sweep))?;
    }
    results.sphere = Some(report);
    Ok(())
}

pub fn langevin_tasks(
    config: &ExperimentConfig,
    results: &mut Results,
    assertions: &mut Vec<Assertion>,
) -> Result<(), CliError> {
    let opts = &config.options;
    let tol = &config.tolerances;
    let seed = config.seeds.langevin;
    let built = model::build_diffusion(&config.model)?;
    let rho = built.potential.rho();

    let paths = match &built.potential {
        BuiltPotential::Quad(pot) => {
            coupled_paths(pot, &built.x0, &built.y0, opts.dt, opts.t_end, seed)?
        }
        BuiltPotential::Bent(pot) => {
            coupled_paths(pot, &built.x0, &built.y0, opts.dt, opts.t_end, seed)?
        }
    };
    let rate = decay_rate_fit(&paths.times, &paths.distances)?;
    check(
        assertions,
        "langevin.bounded",
        paths.diverged_at.is_none(),
        match paths.diverged_at {
            Some(step) => format!("coupling diverged at step {step}"),
            None => "coupling stayed bounded".to_owned(),
        },
    );
    check(
        assertions,
        "langevin.rate",
        rate >= rho - tol.rate_slack,
        format!("fitted rate {rate} against convexity floor {rho}"),
    );
    if let Some(path) = &opts.distance_csv {
        emit::write_file(path, &emit::distance_csv(&paths))?;
    }

    let entropy = if opts.grid.is_empty() {
        None
    } else {
        let sampler = gaussian_sampler(opts.start_mean, opts.start_sd)?;
        let curve = match &built.potential {
            BuiltPotential::Quad(pot) => entropy_decay_estimate(
                pot,
                sampler,
                &opts.grid,
                opts.dt,
                opts.particles,
                opts.bins,
                seed,
            )?,
            BuiltPotential::Bent(pot) => entropy_decay_estimate(
                pot,
                sampler,
                &opts.grid,
                opts.dt,
                opts.particles,
                opts.bins,
                seed,
            )?,
        };
        let worst = curve
            .entropy
            .iter()
            .zip(&curve.envelope)
            .map(|(e, env)| e - env * tol.envelope_factor)
            .fold(f64::NEG_INFINITY, f64::max);
        check(
            assertions,
            "langevin.envelope",
            worst <= 0.0,
            format!("worst excess over the widened envelope {worst:e}"),
        );
        if let Some(path) = &opts.entropy_csv {
            emit::write_file(path, &emit::entropy_csv(&curve))?;
        }
        Some(curve)
    };

    results.langevin = Some(LangevinSection {
        potential: built.name,
        rho,
        dt: opts.dt,
        t_end: opts.t_end,
        seed,
        fitted_rate: rate,
        initial_distance: paths.distances.first().copied().unwrap_or(0.0),
        final_distance: paths.distances.last().copied().unwrap_or(0.0),
        diverged_at: paths.diverged_at,
        entropy,
    });
    Ok(())
}
