//! Command line for the curvent toolkit.
//!
//! `run` executes a TOML or JSON experiment configuration and writes a
//! single JSON report; the other subcommands are direct ways to drive
//! one piece each. The exit code is the contract: 0 when everything
//! asked for passed, 1 when an assertion failed (the failing invariant
//! is named on stderr), 2 when the configuration or arguments could
//! not be understood.

mod config;
mod emit;
mod model;
mod tasks;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{
    BlocksSpec, CertMode, ExperimentConfig, KSpec, ModelDescriptor, Options, Seeds, Task,
    Tolerances,
};
use tasks::{Assertion, Results};

/// The two failure channels: arguments or configuration that cannot be
/// acted on (exit 2), and checked invariants that did not hold (exit 1).
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Assertion(String),
}

impl From<curvent::Error> for CliError {
    fn from(e: curvent::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "curvent", version, about = "Certify and estimate entropy contraction constants")]
struct Cli {
    /// Cap the worker pool; default uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment configuration and emit its report.
    Run(RunArgs),
    /// Certify the contraction constant of a finite chain.
    Certify(ChainArgs),
    /// Certify, then push an ascent estimate against the certificate.
    Estimate(ChainArgs),
    /// Certify, then probe the exponential-moment dual form.
    Duality(ChainArgs),
    /// Field constants of a Gaussian coupling matrix.
    Gff(GffArgs),
    /// Resampling ratio sweep on the unit sphere.
    Sphere(SphereArgs),
    /// Contraction rate and entropy decay of a coupled diffusion.
    Langevin(LangevinArgs),
    /// Transport distances between two measures on a finite metric.
    Wasserstein(WassersteinArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration, or JSON with a .json extension.
    config: PathBuf,
    /// Report destination; overrides the configuration's output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ChainArgs {
    /// One of product, nsets, permutations.
    #[arg(long)]
    model: String,
    /// Binary coordinates of a product, set size of a subset walk, or
    /// permutation degree.
    #[arg(long)]
    n: Option<usize>,
    /// Coordinate sizes of a product, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Ground set size of a subset walk.
    #[arg(long = "N")]
    big_n: Option<usize>,
    /// Drop sizes of a subset walk, comma separated.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Block pattern (singletons, pairs, all-but-one, size-<l>) or
    /// explicit groups like "0,1;1,2".
    #[arg(long)]
    blocks: Option<String>,
    /// Block weights, comma separated; uniform when omitted.
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    /// Pair set for certification.
    #[arg(long, value_enum, default_value = "exhaustive")]
    mode: CertMode,
    /// Certify over exact rationals; needs integer weights.
    #[arg(long)]
    rational: bool,
    /// Random exponent draws for the duality probe.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Seed for the randomized stages.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the result sections as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GffArgs {
    /// Box side lengths, comma separated; builds the nearest-neighbour
    /// matrix and reports its spectral floor.
    #[arg(long, value_delimiter = ',')]
    lattice: Option<Vec<usize>>,
    /// Edge weight for the box matrix.
    #[arg(long)]
    hop: Option<f64>,
    /// JSON file with the dense coupling matrix.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Conditioning blocks; enables the distorted-curvature check.
    #[arg(long)]
    blocks: Option<String>,
    /// Block weights, comma separated; uniform when omitted.
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    /// Gaussian draws per block for the curvature check.
    #[arg(long, default_value_t = 10_000)]
    z_samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the field section as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SphereArgs {
    /// Ambient dimension.
    #[arg(long)]
    n: usize,
    /// Norm exponent of the sphere.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Block pattern or explicit groups.
    #[arg(long, default_value = "pairs")]
    blocks: String,
    /// Block weights, comma separated; uniform when omitted.
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    /// Random pairs to sweep.
    #[arg(long, default_value_t = 100_000)]
    pairs: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the canonical-pair sweep as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the sphere report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LangevinArgs {
    /// quadratic or quadratic-plus-logcosh.
    #[arg(long, default_value = "quadratic")]
    potential: String,
    /// Convexity modulus of the potential.
    #[arg(long)]
    rho: f64,
    /// Slope of the logcosh part.
    #[arg(long)]
    slope: Option<f64>,
    /// Start of the first path, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "1.0")]
    x0: Vec<f64>,
    /// Start of the second path, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1.0")]
    y0: Vec<f64>,
    /// Euler step size.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Horizon of the coupled paths.
    #[arg(long, default_value_t = 5.0)]
    t_end: f64,
    /// Times at which to estimate entropy; enables that stage.
    #[arg(long, value_delimiter = ',')]
    entropy_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100_000)]
    particles: usize,
    #[arg(long, default_value_t = 80)]
    bins: usize,
    /// Mean of the Gaussian initial law for the entropy stage.
    #[arg(long, default_value_t = 2.0)]
    start_mean: f64,
    /// Standard deviation of that initial law.
    #[arg(long, default_value_t = 1.0)]
    start_sd: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the coupled distance curve as CSV.
    #[arg(long)]
    distance_csv: Option<PathBuf>,
    /// Write the entropy curve as CSV.
    #[arg(long)]
    entropy_csv: Option<PathBuf>,
    /// Write the diffusion section as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WassersteinArgs {
    /// JSON metric document (dense rows, optional generator edges).
    dist: PathBuf,
    /// First measure: comma-separated masses or a JSON array file.
    mu: String,
    /// Second measure, same forms.
    nu: String,
    /// Also print the optimal plans.
    #[arg(long)]
    plan: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        if let Err(e) = pool {
            eprintln!("config error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Assertion(msg)) => {
            eprintln!("assertion failed: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Certify(args) => cmd_chain(args, Task::Certify),
        Command::Estimate(args) => cmd_chain(args, Task::Estimate),
        Command::Duality(args) => cmd_chain(args, Task::Duality),
        Command::Gff(args) => cmd_gff(args),
        Command::Sphere(args) => cmd_sphere(args),
        Command::Langevin(args) => cmd_langevin(args),
        Command::Wasserstein(args) => cmd_wasserstein(args),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let config = ExperimentConfig::load(&args.config)?;
    let outcome = tasks::run(&config)?;
    match args.out.as_ref().or(config.output.as_ref()) {
        Some(path) => {
            emit::write_file(path, &outcome.json)?;
            eprintln!("report written to {}", path.display());
        }
        None => print!("{}", outcome.json),
    }
    if outcome.failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Assertion(outcome.failed.join("; ")))
    }
}

fn cmd_chain(args: ChainArgs, task: Task) -> Result<(), CliError> {
    let mut config = ExperimentConfig {
        tasks: vec![task],
        model: chain_descriptor(&args)?,
        output: None,
        seeds: Seeds::default(),
        tolerances: Tolerances::default(),
        options: Options {
            mode: args.mode,
            rational: args.rational,
            trials: args.trials,
            ..Options::default()
        },
    };
    if let Some(seed) = args.seed {
        config.seeds.estimate = seed;
        config.seeds.duality = seed;
    }
    let mut results = Results::default();
    let mut assertions = Vec::new();
    tasks::chain_tasks(&config, &mut results, &mut assertions)?;

    let cert = results.certify.as_ref().expect("chain tasks always certify");
    println!("kappa = {}", cert.kappa);
    if let Some(exact) = &cert.kappa_exact {
        println!("kappa exact = {exact}");
    }
    if let Some(est) = &results.estimate {
        println!("rho_est = {}", est.rho_est);
        println!("spectral factor = {}", est.spectral_factor);
    }
    if let Some(duality) = &results.duality {
        println!("duality max violation = {:e}", duality.max_violation);
    }
    write_out(args.out.as_deref(), &results)?;
    finish(&assertions)
}

fn chain_descriptor(args: &ChainArgs) -> Result<ModelDescriptor, CliError> {
    let blocks = parse_blocks(args.blocks.as_deref())?;
    let theta = args.theta.clone();
    match args.model.as_str() {
        "product" => {
            if args.n.is_none() && args.sizes.is_none() {
                return Err(CliError::Config("--n or --sizes is required for a product".into()));
            }
            Ok(ModelDescriptor::Product { n: args.n, sizes: args.sizes.clone(), blocks, theta })
        }
        "nsets" => {
            let big_n = args
                .big_n
                .ok_or_else(|| CliError::Config("--N is required for the subset walk".into()))?;
            let n = args
                .n
                .ok_or_else(|| CliError::Config("--n is required for the subset walk".into()))?;
            let ks = args
                .k
                .clone()
                .ok_or_else(|| CliError::Config("--k is required for the subset walk".into()))?;
            Ok(ModelDescriptor::Nsets { big_n, n, k: KSpec::Many(ks), theta })
        }
        "permutations" => {
            let n = args
                .n
                .ok_or_else(|| CliError::Config("--n is required for permutations".into()))?;
            Ok(ModelDescriptor::Permutations { n, blocks, theta })
        }
        other => Err(CliError::Config(format!(
            "--model: unknown model \"{other}\" (expected product, nsets, or permutations)"
        ))),
    }
}

fn cmd_gff(args: GffArgs) -> Result<(), CliError> {
    let blocks = args.blocks.as_deref().map(|s| parse_blocks(Some(s))).transpose()?;
    let has_blocks = blocks.is_some();
    let mut config = ExperimentConfig {
        tasks: if has_blocks { vec![Task::CurvatureGff] } else { Vec::new() },
        model: ModelDescriptor::Gff {
            p: None,
            matrix: args.matrix.clone(),
            lattice: args.lattice.clone(),
            hop: args.hop,
            blocks,
            theta: args.theta.clone(),
        },
        output: None,
        seeds: Seeds::default(),
        tolerances: Tolerances::default(),
        options: Options { z_samples: args.z_samples, ..Options::default() },
    };
    if let Some(seed) = args.seed {
        config.seeds.curvature = seed;
    }
    let mut results = Results::default();
    let mut assertions = Vec::new();
    tasks::field_tasks(&config, &mut results, &mut assertions)?;

    let field = results.field.as_ref().expect("field tasks fill the field section");
    if let Some(lattice) = &field.lattice {
        println!("delta (eigen) = {}", lattice.delta_eigen);
        println!("delta (separable form) = {}", lattice.delta_closed_form);
    }
    println!("delta_min = {}", field.delta_min);
    println!("glauber kappa = {}", field.glauber.kappa);
    println!("glauber lambda = {}", field.glauber.lambda);
    println!("linear upper = {}", field.linear_upper);
    if let Some(bound) = field.coverage_lower_bound {
        println!("coverage lower bound = {bound}");
    }
    write_out(args.out.as_deref(), field)?;
    finish(&assertions)
}

fn cmd_sphere(args: SphereArgs) -> Result<(), CliError> {
    let mut config = ExperimentConfig {
        tasks: vec![Task::SphereCheck],
        model: ModelDescriptor::Sphere {
            n: args.n,
            p: args.p,
            blocks: parse_blocks(Some(&args.blocks))?,
            theta: args.theta.clone(),
        },
        output: None,
        seeds: Seeds::default(),
        tolerances: Tolerances::default(),
        options: Options {
            pairs: args.pairs,
            sphere_csv: args.csv.clone(),
            ..Options::default()
        },
    };
    if let Some(seed) = args.seed {
        config.seeds.sphere = seed;
    }
    let mut results = Results::default();
    let mut assertions = Vec::new();
    tasks::sphere_tasks(&config, &mut results, &mut assertions)?;

    let report = results.sphere.as_ref().expect("sphere tasks fill the sphere section");
    println!("ceiling = {}", report.bound);
    println!("max ratio = {}", report.max_ratio);
    println!("canonical ratio = {}", report.canonical_ratio);
    write_out(args.out.as_deref(), report)?;
    finish(&assertions)
}

fn cmd_langevin(args: LangevinArgs) -> Result<(), CliError> {
    let mut config = ExperimentConfig {
        tasks: vec![Task::Langevin],
        model: ModelDescriptor::Langevin {
            potential: args.potential.clone(),
            rho: args.rho,
            slope: args.slope,
            x0: args.x0.clone(),
            y0: args.y0.clone(),
        },
        output: None,
        seeds: Seeds::default(),
        tolerances: Tolerances::default(),
        options: Options {
            dt: args.dt,
            t_end: args.t_end,
            grid: args.entropy_grid.clone().unwrap_or_default(),
            particles: args.particles,
            bins: args.bins,
            start_mean: args.start_mean,
            start_sd: args.start_sd,
            distance_csv: args.distance_csv.clone(),
            entropy_csv: args.entropy_csv.clone(),
            ..Options::default()
        },
    };
    if let Some(seed) = args.seed {
        config.seeds.langevin = seed;
    }
    let mut results = Results::default();
    let mut assertions = Vec::new();
    tasks::langevin_tasks(&config, &mut results, &mut assertions)?;

    let section = results.langevin.as_ref().expect("langevin tasks fill the diffusion section");
    println!("fitted rate = {}", section.fitted_rate);
    println!("convexity floor = {}", section.rho);
    println!("final distance = {}", section.final_distance);
    if let Some(curve) = &section.entropy {
        let last = curve.entropy.last().copied().unwrap_or(0.0);
        println!("entropy at horizon = {last}");
    }
    write_out(args.out.as_deref(), section)?;
    finish(&assertions)
}

fn cmd_wasserstein(args: WassersteinArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.dist)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.dist.display())))?;
    let doc: curvent::MetricJson = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.dist.display())))?;
    let metric = doc.to_metric()?;
    let mu = parse_measure(&args.mu, metric.len(), "mu")?;
    let nu = parse_measure(&args.nu, metric.len(), "nu")?;
    let (w1_cost, w1_plan) = curvent::w1(&metric, &mu, &nu)?;
    let (winf_cost, winf_plan) = curvent::winf(&metric, &mu, &nu)?;
    println!("W1   = {w1_cost}");
    println!("Winf = {winf_cost}");
    if args.plan {
        let average = curvent::PlanJson::new(w1_cost, &w1_plan);
        let bottleneck = curvent::PlanJson::new(winf_cost, &winf_plan);
        println!("average-cost plan:");
        println!("{}", to_pretty(&average)?);
        println!("bottleneck plan:");
        println!("{}", to_pretty(&bottleneck)?);
    }
    Ok(())
}

/// Explicit groups start with a digit ("0,1;1,2"); anything else is a
/// pattern name resolved when the family is built.
fn parse_blocks(arg: Option<&str>) -> Result<BlocksSpec, CliError> {
    let Some(text) = arg else {
        return Ok(BlocksSpec::default());
    };
    let text = text.trim();
    if text.starts_with(|c: char| c.is_ascii_digit()) {
        let groups = text
            .split(';')
            .map(|group| {
                group
                    .split(',')
                    .map(|token| {
                        let token = token.trim();
                        token.parse::<usize>().map_err(|_| {
                            CliError::Config(format!(
                                "--blocks: \"{token}\" is not a site index"
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BlocksSpec::Explicit(groups))
    } else {
        Ok(BlocksSpec::Pattern(text.to_owned()))
    }
}

fn parse_measure(arg: &str, n: usize, label: &str) -> Result<Vec<f64>, CliError> {
    let inline = arg.contains(',') || arg.parse::<f64>().is_ok();
    let values: Vec<f64> = if inline {
        arg.split(',')
            .map(|token| {
                let token = token.trim();
                token.parse::<f64>().map_err(|_| {
                    CliError::Config(format!("{label}: \"{token}\" is not a mass"))
                })
            })
            .collect::<Result<_, _>>()?
    } else {
        let text = fs::read_to_string(arg)
            .map_err(|e| CliError::Config(format!("{label}: {arg}: {e}")))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{label}: {arg}: {e}")))?
    };
    if values.len() != n {
        return Err(CliError::Config(format!(
            "{label}: {} entries for a {n}-point space",
            values.len()
        )));
    }
    Ok(values)
}

fn to_pretty<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("serialization: {e}")))
}

fn write_out<T: serde::Serialize>(path: Option<&std::path::Path>, value: &T) -> Result<(), CliError> {
    if let Some(path) = path {
        let mut json = to_pretty(value)?;
        json.push('\n');
        emit::write_file(path, &json)?;
    }
    Ok(())
}

/// Prints every assertion verdict and turns any failure into exit 1.
fn finish(assertions: &[Assertion]) -> Result<(), CliError> {
    let mut failed = Vec::new();
    for a in assertions {
        let verdict = if a.passed { "ok" } else { "FAIL" };
        println!("[{verdict}] {} ({})", a.name, a.detail);
        if !a.passed {
            failed.push(format!("{}: {}", a.name, a.detail));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Assertion(failed.join("; ")))
    }
}
