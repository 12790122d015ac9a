//! Adaptive importance sampling for stochastic root finding and extreme
//! quantile estimation.
//!
//! The crate solves `E_P[F(X, θ)] = c` when the expectation is only
//! accessible through simulation and the interesting event is rare, by
//! re-tilting the sampling distribution at every iteration toward the
//! sampler that would be optimal at the *current* root estimate. Three
//! solvers are provided — sample average approximation (SAA),
//! Robbins–Monro stochastic approximation (RM-SA), and Polyak–Ruppert
//! averaged SA (PR-SA) — together with:
//!
//! - scalar tilt families with closed-form tilt selectors and asymptotic
//!   variances ([`samplers`]),
//! - weighted empirical quantiles with an O(log n) incremental order
//!   statistic ([`quantile`]),
//! - a multivariate generalization with Jacobian estimation and
//!   delta-method variance reporting ([`multidim`]),
//! - a delta-gamma exponential-twisting engine for portfolio VaR/CVaR
//!   ([`portfolio`]),
//! - a seeded, parallel replication harness with CSV emission and a
//!   minimax duality demonstration ([`harness`]).
//!
//! All randomness flows through a splittable counter-based generator:
//! identical `(problem, config, seed)` produce bit-identical run traces.

pub mod engines;
pub mod error;
pub mod family;
pub mod harness;
pub mod math;
pub mod multidim;
pub mod portfolio;
pub mod problem;
pub mod quantile;
pub mod rng;
pub mod samplers;
pub mod schedule;
pub mod trace;

pub use engines::{
    run_adaptive, run_sa_adaptive, run_saa_adaptive, solve_weighted_scalar_root,
    AdaptiveRunConfig, SolverKind,
};
pub use error::{AdaisError, Result};
pub use family::{check_unit_mean_lr, CrudeIs, FrozenIs, IsFamily, LrCheck};
pub use harness::{
    csv_string, duality_demo_mc, duality_demo_normal, emit_csv, fixed_optimal_is_run, parse_csv,
    run_experiment, toy_asymptotic_variance, toy_density, toy_estimate, toy_true_quantile,
    DualityResult, ExperimentPlan, IsMode, ResultRow, ResultTable, Scenario, SolverName,
    ToyRunSpec,
};
pub use multidim::{
    delta_method_variance, estimate_jacobian, run_sa_adaptive_md, run_saa_adaptive_md,
    GaussianMeanShiftFamily, JacobianEstimate, MdRunConfig, RefitCadence, Scalar1d,
    VectorIsFamily, VectorRootProblem, VectorRunTrace,
};
pub use portfolio::{
    black_scholes, build_quadratic_form, estimate_var_cvar, sample_twisted, twist_selector,
    var_truncation_bounds, BsGreeks, OptionKind, PortfolioLossFamily, PortfolioSpec,
    QuadraticFormModel, VarCvarConfig, VarCvarEstimate,
};
pub use problem::{QuantileProblem, ScalarProblem, ScalarRootProblem, Tail};
pub use quantile::weighted_empirical_quantile;
pub use rng::{RunRng, RunSeed};
pub use samplers::{ExponentialTiltFamily, NormalShiftFamily, ParetoTiltFamily};
pub use schedule::{project_box, Interval, IntervalBox, StepsizeSchedule, TruncationSchedule};
pub use trace::RunTrace;
