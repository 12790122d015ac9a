//! Replication experiments: run each (level, budget, solver, IS-mode) cell
//! across seeded replications in parallel, report variance / MSE / ratio
//! tables, emit deterministic CSV, and demonstrate the minimax weak
//! duality on a grid.

use crate::engines::{run_adaptive, AdaptiveRunConfig, SolverKind};
use crate::error::{AdaisError, Result};
use crate::family::{CrudeIs, FrozenIs, IsFamily};
use crate::math::{normal_pdf, normal_quantile, sample_variance};
use crate::portfolio::{
    estimate_var_cvar_with, PortfolioLossFamily, PortfolioSpec, VarCvarConfig,
};
use crate::problem::{QuantileProblem, ScalarProblem, Tail};
use crate::rng::{stream_id, RunSeed};
use crate::samplers::{
    exponential_asymptotic_variance, exponential_selector, normal_asymptotic_variance,
    normal_is_variance, pareto_asymptotic_variance, pareto_selector, ExponentialTiltFamily,
    NormalShiftFamily, ParetoTiltFamily,
};
use crate::schedule::{Interval, StepsizeSchedule, TruncationSchedule};
use crate::trace::TraceSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Which sampler the solvers run with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IsMode {
    /// Re-tilt each iteration at the current estimate.
    WithIs,
    /// Crude Monte Carlo (likelihood ratios identically one).
    WithoutIs,
    /// Tilt frozen at the selector evaluated at the known true quantile.
    FixedOptimalIs,
}

impl IsMode {
    pub fn label(&self) -> &'static str {
        match self {
            IsMode::WithIs => "with-is",
            IsMode::WithoutIs => "without-is",
            IsMode::FixedOptimalIs => "fixed-optimal-is",
        }
    }
}

/// Solver choice as it appears in plans and CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverName {
    Saa,
    RmSa,
    PrSa,
}

impl SolverName {
    pub fn kind(&self, pr_burn_in: u64) -> SolverKind {
        match self {
            SolverName::Saa => SolverKind::Saa,
            SolverName::RmSa => SolverKind::RmSa,
            SolverName::PrSa => SolverKind::PrSa {
                burn_in: pr_burn_in,
            },
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SolverName::Saa => "saa",
            SolverName::RmSa => "rm-sa",
            SolverName::PrSa => "pr-sa",
        }
    }
}

/// Benchmark scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scenario {
    /// Upper-tail quantile of a standard normal under mean shifting.
    Normal,
    /// Upper-tail quantile of Exp(λ) under rate tilting.
    Exponential { lambda: f64 },
    /// Upper-tail quantile of the Pareto law `P(Z>x)=x^{-λ}` under
    /// tail-index tilting.
    Pareto { lambda: f64 },
    /// Portfolio VaR/CVaR under delta-gamma exponential twisting;
    /// `spec: None` selects the built-in ten-asset benchmark.
    Portfolio {
        #[serde(default)]
        spec: Option<PortfolioSpec>,
    },
}

impl Scenario {
    pub fn label(&self) -> &'static str {
        match self {
            Scenario::Normal => "normal",
            Scenario::Exponential { .. } => "exponential",
            Scenario::Pareto { .. } => "pareto",
            Scenario::Portfolio { .. } => "portfolio",
        }
    }

    fn tag(&self) -> u64 {
        match self {
            Scenario::Normal => 1,
            Scenario::Exponential { .. } => 2,
            Scenario::Pareto { .. } => 3,
            Scenario::Portfolio { .. } => 4,
        }
    }
}

/// True upper-tail quantile for the toy scenarios (used for MSE and the
/// optimal SA gain).
pub fn toy_true_quantile(scenario: &Scenario, p: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(AdaisError::Domain(format!("p must lie in (0,1), got {p}")));
    }
    match scenario {
        Scenario::Normal => normal_quantile(p),
        Scenario::Exponential { lambda } => Ok(-(1.0 - p).ln() / lambda),
        Scenario::Pareto { lambda } => Ok((1.0 - p).powf(-1.0 / lambda)),
        Scenario::Portfolio { .. } => Err(AdaisError::Usage(
            "portfolio quantile has no analytic form".into(),
        )),
    }
}

/// Density of the toy output at a point.
pub fn toy_density(scenario: &Scenario, q: f64) -> Result<f64> {
    match scenario {
        Scenario::Normal => Ok(normal_pdf(q)),
        Scenario::Exponential { lambda } => Ok(lambda * (-lambda * q).exp()),
        Scenario::Pareto { lambda } => Ok(lambda * q.powf(-lambda - 1.0)),
        Scenario::Portfolio { .. } => Err(AdaisError::Usage(
            "portfolio loss density has no analytic form".into(),
        )),
    }
}

/// Closed-form asymptotic variance of `sqrt(n)(q̂_n - q*)` for the
/// adaptively tilted SAA / PR-SA quantile estimator.
pub fn toy_asymptotic_variance(scenario: &Scenario, p: f64) -> Result<f64> {
    let q = toy_true_quantile(scenario, p)?;
    match scenario {
        Scenario::Normal => Ok(normal_asymptotic_variance(q, p)),
        Scenario::Exponential { lambda } => Ok(exponential_asymptotic_variance(*lambda, q)),
        Scenario::Pareto { lambda } => pareto_asymptotic_variance(*lambda, q),
        Scenario::Portfolio { .. } => unreachable!("toy_true_quantile rejected portfolio"),
    }
}

fn default_replications() -> u32 {
    200
}

fn default_burn_in() -> u64 {
    100
}

/// A full experiment: the cross product of levels, budgets, solvers and
/// IS modes, replicated with per-cell seed streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub scenario: Scenario,
    pub p_levels: Vec<f64>,
    pub sample_sizes: Vec<u64>,
    #[serde(default = "default_replications")]
    pub replications: u32,
    pub solvers: Vec<SolverName>,
    pub is_modes: Vec<IsMode>,
    #[serde(default)]
    pub seed_base: u64,
    /// Polyak-Ruppert averaging starts after this many iterations.
    #[serde(default = "default_burn_in")]
    pub pr_burn_in: u64,
    /// SA gain override; the default is the optimal `γ = 1/f(q*)` for toys
    /// and a Gaussian-moment approximation of it for portfolios.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// SA projection interval override.
    #[serde(default)]
    pub sa_projection: Option<(f64, f64)>,
    /// Initial iterate override (default: midpoint of the projection set).
    #[serde(default)]
    pub theta0: Option<f64>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(AdaisError::Config(
                "variance estimation needs at least 2 replications".into(),
            ));
        }
        if self.p_levels.is_empty() || self.sample_sizes.is_empty() {
            return Err(AdaisError::Config("empty level or size grid".into()));
        }
        if self.solvers.is_empty() || self.is_modes.is_empty() {
            return Err(AdaisError::Config("empty solver or mode set".into()));
        }
        for &p in &self.p_levels {
            if !(0.0 < p && p < 1.0) {
                return Err(AdaisError::Config(format!("p level {p} outside (0,1)")));
            }
        }
        if self.sample_sizes.iter().any(|&n| n == 0) {
            return Err(AdaisError::Config("sample sizes must be positive".into()));
        }
        if matches!(self.scenario, Scenario::Portfolio { .. })
            && self.is_modes.contains(&IsMode::FixedOptimalIs)
        {
            return Err(AdaisError::Config(
                "fixed-optimal mode needs an analytic quantile; portfolio has none".into(),
            ));
        }
        Ok(())
    }

    /// The benchmark budget grid 500 * 2^k, k = 0..=8.
    pub fn geometric_sizes() -> Vec<u64> {
        (0..=8).map(|k| 500u64 << k).collect()
    }
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub p: f64,
    pub n: u64,
    pub solver: String,
    pub is_mode: String,
    pub mean: f64,
    pub variance: f64,
    pub mse: f64,
    /// `var(without-is) / var(this mode)`, filled for tilted rows when the
    /// matching crude cell exists.
    pub ratio: Option<f64>,
    pub failures: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn get(&self, scenario: &str, p: f64, n: u64, solver: &str, mode: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| {
            r.scenario == scenario && r.p == p && r.n == n && r.solver == solver && r.is_mode == mode
        })
    }

    fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            (
                &a.scenario,
                a.p.to_bits(),
                a.n,
                &a.solver,
                &a.is_mode,
            )
                .cmp(&(&b.scenario, b.p.to_bits(), b.n, &b.solver, &b.is_mode))
        });
    }

    fn fill_ratios(&mut self) {
        let crude: Vec<(String, u64, u64, String, f64)> = self
            .rows
            .iter()
            .filter(|r| r.is_mode == IsMode::WithoutIs.label())
            .map(|r| {
                (
                    r.scenario.clone(),
                    r.p.to_bits(),
                    r.n,
                    r.solver.clone(),
                    r.variance,
                )
            })
            .collect();
        for row in &mut self.rows {
            if row.is_mode == IsMode::WithoutIs.label() {
                row.ratio = None;
                continue;
            }
            row.ratio = crude
                .iter()
                .find(|(s, p, n, solver, _)| {
                    *s == row.scenario
                        && *p == row.p.to_bits()
                        && *n == row.n
                        && *solver == row.solver
                })
                .map(|(_, _, _, _, v)| v / row.variance);
        }
    }
}

struct ToyContext {
    scenario: Scenario,
    q_star: f64,
    gamma: f64,
    projection: Interval,
    truncation: TruncationSchedule,
    theta0: f64,
}

impl ToyContext {
    fn new(plan: &ExperimentPlan, p: f64) -> Result<Self> {
        let q_star = toy_true_quantile(&plan.scenario, p)?;
        let density = toy_density(&plan.scenario, q_star)?;
        let gamma = plan.gamma.unwrap_or(1.0 / density);
        if 2.0 * gamma * density <= 1.0 {
            eprintln!(
                "warning: RM-SA gain {gamma} violates 2*gamma*f(q*) > 1 at p={p}; \
                 the CLT variance formula no longer applies (consistency still holds)"
            );
        }
        let projection = match plan.sa_projection {
            Some((lo, hi)) => Interval::new(lo, hi)?,
            None => match plan.scenario {
                Scenario::Normal => Interval::new(0.0, 5.0)?,
                Scenario::Exponential { .. } => Interval::new(0.0, (1.5 * q_star).max(5.0))?,
                Scenario::Pareto { .. } => Interval::new(1.0, 1.5 * q_star)?,
                Scenario::Portfolio { .. } => unreachable!(),
            },
        };
        let truncation = match plan.scenario {
            Scenario::Normal => TruncationSchedule::LogGrowth { a: 5.0, eps: 0.1 },
            Scenario::Exponential { lambda } | Scenario::Pareto { lambda } => {
                TruncationSchedule::RateTilt {
                    c: 1.0,
                    eps: 0.1,
                    floor: 0.0,
                    hi: lambda,
                }
            }
            Scenario::Portfolio { .. } => unreachable!(),
        };
        let theta0 = plan.theta0.unwrap_or_else(|| projection.midpoint());
        Ok(Self {
            scenario: plan.scenario.clone(),
            q_star,
            gamma,
            projection,
            truncation,
            theta0,
        })
    }

    fn fixed_alpha(&self) -> Result<f64> {
        match &self.scenario {
            Scenario::Normal => Ok(self.q_star),
            Scenario::Exponential { lambda } => exponential_selector(*lambda, self.q_star),
            Scenario::Pareto { lambda } => pareto_selector(*lambda, self.q_star),
            Scenario::Portfolio { .. } => unreachable!(),
        }
    }

    fn run_config(&self, solver: SolverKind, n: u64, seed: RunSeed) -> AdaptiveRunConfig {
        let exponent = match solver {
            SolverKind::PrSa { .. } => 0.9,
            _ => 1.0,
        };
        AdaptiveRunConfig {
            solver,
            budget: n,
            seed,
            theta0: self.theta0,
            alpha1: None,
            truncation: match solver {
                SolverKind::Saa => Some(self.truncation.clone()),
                _ => None,
            },
            stepsize: StepsizeSchedule::new(self.gamma, exponent).ok(),
            projection: Some(self.projection),
            refit_every: 1,
            trace: TraceSpec::final_only(),
        }
    }
}

enum ToyFamily {
    Normal(NormalShiftFamily),
    Exponential(ExponentialTiltFamily),
    Pareto(ParetoTiltFamily),
}

impl ToyFamily {
    fn new(scenario: &Scenario) -> Result<Self> {
        Ok(match scenario {
            Scenario::Normal => ToyFamily::Normal(NormalShiftFamily),
            Scenario::Exponential { lambda } => {
                ToyFamily::Exponential(ExponentialTiltFamily::new(*lambda)?)
            }
            Scenario::Pareto { lambda } => ToyFamily::Pareto(ParetoTiltFamily::new(*lambda)?),
            Scenario::Portfolio { .. } => {
                return Err(AdaisError::Usage("portfolio is not a toy scenario".into()))
            }
        })
    }
}

impl IsFamily for ToyFamily {
    type Point = f64;

    fn base_param(&self) -> f64 {
        match self {
            ToyFamily::Normal(f) => f.base_param(),
            ToyFamily::Exponential(f) => f.base_param(),
            ToyFamily::Pareto(f) => f.base_param(),
        }
    }
    fn param_space(&self) -> (f64, f64) {
        match self {
            ToyFamily::Normal(f) => f.param_space(),
            ToyFamily::Exponential(f) => f.param_space(),
            ToyFamily::Pareto(f) => f.param_space(),
        }
    }
    fn selector(&self, theta: f64) -> f64 {
        match self {
            ToyFamily::Normal(f) => f.selector(theta),
            ToyFamily::Exponential(f) => f.selector(theta),
            ToyFamily::Pareto(f) => f.selector(theta),
        }
    }
    fn sample(&self, alpha: f64, rng: &mut crate::rng::RunRng) -> Result<f64> {
        match self {
            ToyFamily::Normal(f) => f.sample(alpha, rng),
            ToyFamily::Exponential(f) => f.sample(alpha, rng),
            ToyFamily::Pareto(f) => f.sample(alpha, rng),
        }
    }
    fn log_likelihood_ratio(&self, x: &f64, alpha: f64) -> f64 {
        match self {
            ToyFamily::Normal(f) => f.log_likelihood_ratio(x, alpha),
            ToyFamily::Exponential(f) => f.log_likelihood_ratio(x, alpha),
            ToyFamily::Pareto(f) => f.log_likelihood_ratio(x, alpha),
        }
    }
    fn point_value(&self, x: &f64) -> f64 {
        *x
    }
}

fn mode_tag(mode: IsMode) -> u64 {
    match mode {
        IsMode::WithIs => 1,
        IsMode::WithoutIs => 2,
        IsMode::FixedOptimalIs => 3,
    }
}

fn solver_tag(s: SolverName) -> u64 {
    match s {
        SolverName::Saa => 1,
        SolverName::RmSa => 2,
        SolverName::PrSa => 3,
    }
}

fn cell_seed(plan_seed: u64, scenario: &Scenario, p: f64, n: u64, solver: SolverName, mode: IsMode, rep: u32) -> RunSeed {
    RunSeed::new(
        plan_seed,
        stream_id(&[
            scenario.tag(),
            p.to_bits(),
            n,
            solver_tag(solver),
            mode_tag(mode),
            rep as u64,
        ]),
    )
}

/// Run one toy replication to its final estimate.
fn toy_replication(
    ctx: &ToyContext,
    family: &ToyFamily,
    p: f64,
    n: u64,
    solver: SolverKind,
    mode: IsMode,
    seed: RunSeed,
) -> Result<f64> {
    let problem: ScalarProblem<f64> =
        ScalarProblem::Quantile(QuantileProblem::new(|x: &f64| *x, p, Tail::Upper)?);
    let cfg = ctx.run_config(solver, n, seed);
    let trace = match mode {
        IsMode::WithIs => run_adaptive(&problem, family, &cfg)?,
        IsMode::WithoutIs => run_adaptive(
            &problem,
            &CrudeIs {
                inner: family_ref(family),
            },
            &cfg,
        )?,
        IsMode::FixedOptimalIs => run_adaptive(
            &problem,
            &FrozenIs {
                inner: family_ref(family),
                alpha: ctx.fixed_alpha()?,
            },
            &cfg,
        )?,
    };
    Ok(trace.final_estimate)
}

// Cheap shim so the wrappers can hold the family by reference.
struct FamilyRef<'a>(&'a ToyFamily);

fn family_ref(f: &ToyFamily) -> FamilyRef<'_> {
    FamilyRef(f)
}

impl IsFamily for FamilyRef<'_> {
    type Point = f64;

    fn base_param(&self) -> f64 {
        self.0.base_param()
    }
    fn param_space(&self) -> (f64, f64) {
        self.0.param_space()
    }
    fn selector(&self, theta: f64) -> f64 {
        self.0.selector(theta)
    }
    fn sample(&self, alpha: f64, rng: &mut crate::rng::RunRng) -> Result<f64> {
        self.0.sample(alpha, rng)
    }
    fn log_likelihood_ratio(&self, x: &f64, alpha: f64) -> f64 {
        self.0.log_likelihood_ratio(x, alpha)
    }
    fn point_value(&self, x: &f64) -> f64 {
        *x
    }
}

/// Inputs of one toy replication (everything but the seed).
#[derive(Debug, Clone)]
pub struct ToyRunSpec {
    pub scenario: Scenario,
    pub p: f64,
    pub n: u64,
    pub solver: SolverName,
    pub mode: IsMode,
    pub pr_burn_in: u64,
    pub gamma: Option<f64>,
    pub sa_projection: Option<(f64, f64)>,
    pub theta0: Option<f64>,
}

impl ToyRunSpec {
    pub fn new(scenario: Scenario, p: f64, n: u64, solver: SolverName, mode: IsMode) -> Self {
        Self {
            scenario,
            p,
            n,
            solver,
            mode,
            pr_burn_in: default_burn_in(),
            gamma: None,
            sa_projection: None,
            theta0: None,
        }
    }
}

/// One seeded toy replication to its final estimate.
pub fn toy_estimate(spec: &ToyRunSpec, seed: RunSeed) -> Result<f64> {
    let plan = ExperimentPlan {
        scenario: spec.scenario.clone(),
        p_levels: vec![spec.p],
        sample_sizes: vec![spec.n],
        replications: 2,
        solvers: vec![spec.solver],
        is_modes: vec![spec.mode],
        seed_base: seed.seed,
        pr_burn_in: spec.pr_burn_in,
        gamma: spec.gamma,
        sa_projection: spec.sa_projection,
        theta0: spec.theta0,
    };
    let ctx = ToyContext::new(&plan, spec.p)?;
    let family = ToyFamily::new(&spec.scenario)?;
    toy_replication(
        &ctx,
        &family,
        spec.p,
        spec.n,
        spec.solver.kind(spec.pr_burn_in),
        spec.mode,
        seed,
    )
}

/// Run a frozen-at-the-optimum IS replication (the "as if the root were
/// known" reference) for a toy scenario.
pub fn fixed_optimal_is_run(
    scenario: &Scenario,
    p: f64,
    n: u64,
    solver: SolverKind,
    seed: RunSeed,
) -> Result<f64> {
    let name = match solver {
        SolverKind::Saa => SolverName::Saa,
        SolverKind::RmSa => SolverName::RmSa,
        SolverKind::PrSa { .. } => SolverName::PrSa,
    };
    let mut spec = ToyRunSpec::new(scenario.clone(), p, n, name, IsMode::FixedOptimalIs);
    if let SolverKind::PrSa { burn_in } = solver {
        spec.pr_burn_in = burn_in;
    }
    toy_estimate(&spec, seed)
}

/// Execute the plan: every cell runs `replications` independent seeded
/// runs (in parallel), and the table reports per-cell mean, variance, MSE
/// against the true quantile, and the variance ratio against the matching
/// crude cell. Identical plan and seed produce identical tables.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ResultTable> {
    plan.validate()?;
    let mut table = ResultTable::default();
    match &plan.scenario {
        Scenario::Portfolio { spec } => {
            let spec = spec.clone().unwrap_or_else(PortfolioSpec::ten_asset_benchmark);
            run_portfolio_cells(plan, &spec, &mut table)?;
        }
        _ => run_toy_cells(plan, &mut table)?,
    }
    table.fill_ratios();
    table.sort();
    Ok(table)
}

fn summarize(
    finals: &[Result<f64>],
    replications: u32,
    reference: Option<f64>,
) -> (f64, f64, f64, u32) {
    let ok: Vec<f64> = finals.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let failures = (finals.len() - ok.len()) as u32;
    let invalid = failures as f64 > 0.01 * replications as f64 || ok.len() < 2;
    if invalid {
        return (f64::NAN, f64::NAN, f64::NAN, failures);
    }
    let mean = ok.iter().sum::<f64>() / ok.len() as f64;
    let variance = sample_variance(&ok);
    let mse = match reference {
        Some(q) => ok.iter().map(|x| (x - q) * (x - q)).sum::<f64>() / ok.len() as f64,
        None => f64::NAN,
    };
    (mean, variance, mse, failures)
}

fn run_toy_cells(plan: &ExperimentPlan, table: &mut ResultTable) -> Result<()> {
    let family = ToyFamily::new(&plan.scenario)?;
    for &p in &plan.p_levels {
        let ctx = ToyContext::new(plan, p)?;
        for &n in &plan.sample_sizes {
            for &solver in &plan.solvers {
                for &mode in &plan.is_modes {
                    let kind = solver.kind(plan.pr_burn_in);
                    let finals: Vec<Result<f64>> = (0..plan.replications)
                        .into_par_iter()
                        .map(|rep| {
                            let seed =
                                cell_seed(plan.seed_base, &plan.scenario, p, n, solver, mode, rep);
                            toy_replication(&ctx, &family, p, n, kind, mode, seed)
                        })
                        .collect();
                    let (mean, variance, mse, failures) =
                        summarize(&finals, plan.replications, Some(ctx.q_star));
                    table.rows.push(ResultRow {
                        scenario: plan.scenario.label().into(),
                        p,
                        n,
                        solver: solver.label().into(),
                        is_mode: mode.label().into(),
                        mean,
                        variance,
                        mse,
                        ratio: None,
                        failures,
                    });
                }
            }
        }
    }
    Ok(())
}

fn run_portfolio_cells(
    plan: &ExperimentPlan,
    spec: &PortfolioSpec,
    table: &mut ResultTable,
) -> Result<()> {
    let family = PortfolioLossFamily::new(spec)?;
    let n_max = *plan.sample_sizes.iter().max().expect("validated nonempty");
    for &p in &plan.p_levels {
        // High-budget reference run for MSE reporting (the true VaR has no
        // analytic form).
        let ref_cfg = VarCvarConfig::new(p, SolverKind::Saa, true);
        let ref_seed = RunSeed::new(
            plan.seed_base,
            stream_id(&[plan.scenario.tag(), p.to_bits(), 0xeef]),
        );
        let reference = estimate_var_cvar_with(&family, &ref_cfg, 2 * n_max, ref_seed)?;
        for &n in &plan.sample_sizes {
            for &solver in &plan.solvers {
                for &mode in &plan.is_modes {
                    let kind = solver.kind(plan.pr_burn_in);
                    let mut cfg = VarCvarConfig::new(p, kind, mode == IsMode::WithIs);
                    cfg.stepsize = match plan.gamma {
                        Some(g) => Some(StepsizeSchedule::new(
                            g,
                            if matches!(kind, SolverKind::PrSa { .. }) {
                                0.9
                            } else {
                                1.0
                            },
                        )?),
                        None => None,
                    };
                    cfg.projection = match plan.sa_projection {
                        Some((lo, hi)) => Some(Interval::new(lo, hi)?),
                        None => None,
                    };
                    let results: Vec<Result<(f64, f64)>> = (0..plan.replications)
                        .into_par_iter()
                        .map(|rep| {
                            let seed =
                                cell_seed(plan.seed_base, &plan.scenario, p, n, solver, mode, rep);
                            estimate_var_cvar_with(&family, &cfg, n, seed)
                                .map(|e| (e.var, e.cvar))
                        })
                        .collect();
                    let vars: Vec<Result<f64>> =
                        results.iter().map(|r| r.as_ref().map(|x| x.0).map_err(clone_err)).collect();
                    let cvars: Vec<Result<f64>> =
                        results.iter().map(|r| r.as_ref().map(|x| x.1).map_err(clone_err)).collect();
                    let (mean_v, var_v, mse_v, fail_v) =
                        summarize(&vars, plan.replications, Some(reference.var));
                    let (mean_c, var_c, mse_c, fail_c) =
                        summarize(&cvars, plan.replications, Some(reference.cvar));
                    table.rows.push(ResultRow {
                        scenario: "portfolio-var".into(),
                        p,
                        n,
                        solver: solver.label().into(),
                        is_mode: mode.label().into(),
                        mean: mean_v,
                        variance: var_v,
                        mse: mse_v,
                        ratio: None,
                        failures: fail_v,
                    });
                    table.rows.push(ResultRow {
                        scenario: "portfolio-cvar".into(),
                        p,
                        n,
                        solver: solver.label().into(),
                        is_mode: mode.label().into(),
                        mean: mean_c,
                        variance: var_c,
                        mse: mse_c,
                        ratio: None,
                        failures: fail_c,
                    });
                }
            }
        }
    }
    Ok(())
}

fn clone_err(e: &AdaisError) -> AdaisError {
    AdaisError::Solver {
        iteration: 0,
        message: e.to_string(),
    }
}

/// Grid check of the minimax weak duality
/// `max_θ min_α V(θ, α) <= min_α max_θ V(θ, α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityResult {
    pub maxmin: f64,
    pub minmax: f64,
    /// Monte Carlo error scale of the V estimates (0 for closed forms).
    pub mc_err: f64,
}

impl DualityResult {
    pub fn holds(&self, sigmas: f64) -> bool {
        self.maxmin <= self.minmax + sigmas * self.mc_err
    }
}

fn grid_optima(v: &[Vec<f64>]) -> (f64, f64) {
    // v[i][j] = V(θ_i, α_j).
    let maxmin = v
        .iter()
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max);
    let n_alpha = v[0].len();
    let minmax = (0..n_alpha)
        .map(|j| v.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::INFINITY, f64::min);
    (maxmin, minmax)
}

/// Closed-form duality demonstration for the normal mean-shift family:
/// `V(θ, α) = Var_{P_α}(1{Z >= θ} ℓ) / φ(θ)²` evaluated exactly on the
/// grids.
pub fn duality_demo_normal(theta_grid: &[f64], alpha_grid: &[f64]) -> Result<DualityResult> {
    if theta_grid.is_empty() || alpha_grid.is_empty() {
        return Err(AdaisError::Usage("duality grids must be nonempty".into()));
    }
    let v: Vec<Vec<f64>> = theta_grid
        .iter()
        .map(|&th| {
            let denom = normal_pdf(th).powi(2);
            alpha_grid
                .iter()
                .map(|&a| normal_is_variance(th, a) / denom)
                .collect()
        })
        .collect();
    let (maxmin, minmax) = grid_optima(&v);
    Ok(DualityResult {
        maxmin,
        minmax,
        mc_err: 0.0,
    })
}

/// Monte Carlo duality demonstration for an arbitrary family and output
/// `F(x, θ)`: each cell estimates
/// `V(θ, α) = weight(θ) * Var_{X~P_α}(F(X, θ) ℓ(X, α))`
/// from `n_mc` draws split into 10 batches (the batch spread yields the
/// reported Monte Carlo error scale).
pub fn duality_demo_mc<F, G, W>(
    family: &F,
    output: G,
    weight: W,
    theta_grid: &[f64],
    alpha_grid: &[f64],
    n_mc: usize,
    seed: RunSeed,
) -> Result<DualityResult>
where
    F: IsFamily,
    G: Fn(&F::Point, f64) -> f64,
    W: Fn(f64) -> f64,
{
    if theta_grid.is_empty() || alpha_grid.is_empty() {
        return Err(AdaisError::Usage("duality grids must be nonempty".into()));
    }
    if n_mc < 100 {
        return Err(AdaisError::Usage("duality needs n_mc >= 100".into()));
    }
    let batches = 10usize;
    let per_batch = (n_mc / batches).max(10);
    let mut v = vec![vec![0.0; alpha_grid.len()]; theta_grid.len()];
    let mut worst_se = 0.0f64;
    for (j, &alpha) in alpha_grid.iter().enumerate() {
        let mut rng = RunSeed::new(seed.seed, stream_id(&[seed.stream, j as u64])).rng();
        // One sample stream per alpha, shared across θ (the V surface is
        // evaluated on common draws, which only helps the comparison).
        let mut batch_vals = vec![vec![0.0f64; batches]; theta_grid.len()];
        for b in 0..batches {
            let mut sums = vec![(0.0f64, 0.0f64); theta_grid.len()];
            for _ in 0..per_batch {
                let x = family.sample(alpha, &mut rng)?;
                let lr = family.log_likelihood_ratio(&x, alpha).exp();
                for (i, &th) in theta_grid.iter().enumerate() {
                    let y = output(&x, th) * lr;
                    sums[i].0 += y;
                    sums[i].1 += y * y;
                }
            }
            for (i, (s, s2)) in sums.iter().enumerate() {
                let m = per_batch as f64;
                let mean = s / m;
                batch_vals[i][b] = (s2 / m - mean * mean).max(0.0);
            }
        }
        for (i, &th) in theta_grid.iter().enumerate() {
            let w = weight(th);
            let vals: Vec<f64> = batch_vals[i].iter().map(|x| x * w).collect();
            let mean = vals.iter().sum::<f64>() / batches as f64;
            let sd = (vals
                .iter()
                .map(|x| (x - mean) * (x - mean))
                .sum::<f64>()
                / (batches as f64 - 1.0))
                .sqrt();
            v[i][j] = mean;
            worst_se = worst_se.max(sd / (batches as f64).sqrt());
        }
    }
    let (maxmin, minmax) = grid_optima(&v);
    Ok(DualityResult {
        maxmin,
        minmax,
        mc_err: worst_se,
    })
}

fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

/// Render the table as CSV (schema
/// `scenario,p,n,solver,is_mode,mean,variance,mse,ratio`), rows in
/// deterministic key order, floats in shortest round-trip form, LF endings.
pub fn csv_string(table: &ResultTable) -> String {
    let mut out = String::from("scenario,p,n,solver,is_mode,mean,variance,mse,ratio\n");
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.scenario,
            r.p,
            r.n,
            r.solver,
            r.is_mode,
            fmt_float(r.mean),
            fmt_float(r.variance),
            fmt_float(r.mse),
            r.ratio.map(|x| format!("{x}")).unwrap_or_default(),
        ));
    }
    out
}

/// Write the CSV to a file.
pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|source| AdaisError::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(csv_string(table).as_bytes())
        .map_err(|source| AdaisError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Parse a CSV produced by [`csv_string`] back into a table.
pub fn parse_csv(s: &str) -> Result<ResultTable> {
    let mut rows = Vec::new();
    let mut lines = s.lines();
    let header = lines.next().unwrap_or_default();
    if header != "scenario,p,n,solver,is_mode,mean,variance,mse,ratio" {
        return Err(AdaisError::Usage(format!("unexpected CSV header: {header}")));
    }
    for (k, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(AdaisError::Usage(format!(
                "line {}: expected 9 fields, got {}",
                k + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            if s.is_empty() {
                Ok(f64::NAN)
            } else {
                s.parse()
                    .map_err(|e| AdaisError::Usage(format!("bad float {s}: {e}")))
            }
        };
        rows.push(ResultRow {
            scenario: fields[0].into(),
            p: parse(fields[1])?,
            n: fields[2]
                .parse()
                .map_err(|e| AdaisError::Usage(format!("bad n {}: {e}", fields[2])))?,
            solver: fields[3].into(),
            is_mode: fields[4].into(),
            mean: parse(fields[5])?,
            variance: parse(fields[6])?,
            mse: parse(fields[7])?,
            ratio: if fields[8].is_empty() {
                None
            } else {
                Some(parse(fields[8])?)
            },
            failures: 0,
        });
    }
    Ok(ResultTable { rows })
}
