//! Certified lower bounds and estimated upper bounds for the entropy
//! contraction constants of weighted Markov kernel families.
//!
//! Given kernels `T_1 .. T_M` on a finite state space, all stationary for
//! the same probability measure `P`, and weights `theta` summing to one,
//! the central quantity is the largest `kappa` such that
//!
//! ```text
//!   sum_i theta_i * Ent(T_i* f)  <=  (1 - kappa) * Ent(f)
//! ```
//!
//! for every nonnegative `f`. The [`certify`] module produces a lower
//! bound on `kappa` from a metric coupling criterion: a per-kernel
//! Lipschitz constant for the adjoints under the infinity-Wasserstein
//! distance, combined with an averaged 1-Wasserstein contraction bound.
//! The [`estimate`] module brackets the same constant from the other side
//! with a nonlinear entropy-ratio ascent and a spectral variance bound.
//!
//! Everything downstream of a certificate is plain finite-dimensional
//! arithmetic, so the core types are generic over a [`scalar::Scalar`];
//! instantiating them with rationals turns the certifier into an exact
//! decision procedure on small spaces.
//!
//! The model modules ([`models`], [`gff`], [`sphere`], [`langevin`])
//! build the families whose contraction constants have known closed
//! forms, which the test suite pins against the generic machinery.

pub mod certify;
pub mod error;
pub mod estimate;
pub mod family;
pub mod gff;
pub mod jsonio;
pub mod kernel;
pub mod langevin;
pub mod metric;
pub mod models;
pub mod scalar;
pub mod space;
pub mod sphere;
pub mod transport;

pub use certify::{certify_kappa, lipschitz_constant, pair_set, CertReport, PairMode};
pub use error::{Error, Result};
pub use estimate::{
    bl_duality_check, bl_violation, entropy_ratio, estimate_rho, lambda_op, lipschitz_seminorm,
    variance_contraction_spectral, AscentConfig, DualityReport, EstimateReport,
};
pub use family::BlockWeights;
pub use gff::{
    build_gff, check_distorted_curvature, conditional_matrix, contraction_lower_bound,
    curvature_violation_at, glauber_constants, lambda_upper_linear, lattice_delta,
    linear_rayleigh, sigma_quantities, CurvatureReport, GffInstance, GlauberConstants,
    LatticeDelta, SigmaReport,
};
pub use jsonio::{
    CertReportJson, EstimateReportJson, InstanceJson, MetricJson, PlanJson, SigmaReportJson,
    SpaceJson, SCHEMA_VERSION,
};
pub use kernel::{conditional_kernel, MarkovKernel};
pub use langevin::{
    check_convexity, check_gradient, coupled_paths, decay_rate_fit, entropy_decay_estimate,
    gaussian_sampler, CoupledPaths, EntropyCurve, Potential, Quadratic, QuadraticLogCosh,
};
pub use metric::Metric;
pub use models::{
    build_nsets, build_permutations, build_product, build_product_with_marginals,
    cayley_distance, downup_theoretical_kappa, enumerate_permutations, BlockFamily,
    ModelInstance,
};
pub use scalar::{BigRat, Rat, Scalar};
pub use space::{entropy, Density, FiniteSpace};
pub use sphere::{
    closed_form_w, cone_sample, contraction_check, sphere_dist, CanonicalRatio, PairKind,
    RatioSample, SpherePoint, SphereReport,
};
pub use transport::{w1, winf, TransportPlan};
