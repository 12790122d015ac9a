//! Multivariate adaptive importance sampling: vector root problems, the
//! Jacobian estimate that feeds the tilt selector `I(θ, J)`, the
//! delta-method variance of a scalar performance function, and the
//! d-dimensional SAA / SA engines.
//!
//! The d = 1 path is shared with the scalar engines (same inner solver,
//! same arithmetic), so embedding a scalar problem reproduces the scalar
//! run bit for bit under the same seed.

use crate::engines::{expand_and_solve, SolverKind};
use crate::error::{AdaisError, Result};
use crate::family::IsFamily;
use crate::rng::{RunRng, RunSeed};
use crate::schedule::{IntervalBox, StepsizeSchedule, TruncationSchedule};
use crate::trace::TraceFlags;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use std::sync::Arc;

/// Tilt family with a vector parameter whose selector may consult a
/// Jacobian estimate.
pub trait VectorIsFamily: Sync {
    type Point;

    fn param_dim(&self) -> usize;
    fn base_param(&self) -> Vec<f64>;
    /// `I(θ, Ĵ)`; `jacobian` is `None` until an estimate exists.
    fn selector(&self, theta: &[f64], jacobian: Option<&JacobianEstimate>) -> Vec<f64>;
    /// Whether the engine must maintain a Jacobian estimate for the selector.
    fn selector_uses_jacobian(&self) -> bool {
        false
    }
    fn sample(&self, alpha: &[f64], rng: &mut RunRng) -> Result<Self::Point>;
    fn log_likelihood_ratio(&self, x: &Self::Point, alpha: &[f64]) -> f64;
    /// Scalar summary recorded in traces.
    fn point_value(&self, x: &Self::Point) -> f64;
}

/// Find `θ ∈ R^d` with `E_P[F(X, θ)] = c`.
#[derive(Clone)]
pub struct VectorRootProblem<X> {
    pub dim: usize,
    /// Writes `F(x, θ)` into `out` (length `dim`); deterministic in `(x, θ)`.
    pub evaluate: Arc<dyn Fn(&X, &[f64], &mut [f64]) + Send + Sync>,
    /// Optional analytic per-sample derivative: writes `DF(x, θ)/Dθ` into
    /// `out` in row-major order (`out[k*dim + j] = ∂F_k/∂θ_j`).
    pub jacobian: Option<Arc<dyn Fn(&X, &[f64], &mut [f64]) + Send + Sync>>,
    pub target: Vec<f64>,
}

impl<X> VectorRootProblem<X> {
    pub fn new(
        dim: usize,
        evaluate: impl Fn(&X, &[f64], &mut [f64]) + Send + Sync + 'static,
        target: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 || target.len() != dim {
            return Err(AdaisError::Config(format!(
                "target length {} must equal dim {dim}",
                target.len()
            )));
        }
        Ok(Self {
            dim,
            evaluate: Arc::new(evaluate),
            jacobian: None,
            target,
        })
    }

    pub fn with_jacobian(
        mut self,
        jacobian: impl Fn(&X, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }
}

/// Estimated Jacobian of the weighted empirical objective.
#[derive(Debug, Clone)]
pub struct JacobianEstimate {
    pub matrix: DMatrix<f64>,
    pub at_theta: Vec<f64>,
    pub n_samples: usize,
    /// Condition number exceeded 1e12 (or the matrix was exactly singular);
    /// selectors receive the last well-conditioned estimate instead.
    pub ill_conditioned: bool,
}

const CONDITION_LIMIT: f64 = 1e12;

impl JacobianEstimate {
    fn assess(matrix: DMatrix<f64>, at_theta: Vec<f64>, n_samples: usize) -> Self {
        let svd = matrix.clone().svd(false, false);
        let max_sv = svd.singular_values.max();
        let min_sv = svd.singular_values.min();
        let ill_conditioned =
            !(min_sv > 0.0) || !max_sv.is_finite() || max_sv / min_sv > CONDITION_LIMIT;
        Self {
            matrix,
            at_theta,
            n_samples,
            ill_conditioned,
        }
    }
}

/// Central finite differences of the weighted empirical objective
/// `Ḡ(θ) = (1/n) Σ F(x_i, θ) ℓ_i` along each coordinate.
pub fn estimate_jacobian<X>(
    samples: &[(X, f64)],
    evaluate: &dyn Fn(&X, &[f64], &mut [f64]),
    theta: &[f64],
    fd_step: f64,
) -> Result<JacobianEstimate> {
    if samples.is_empty() {
        return Err(AdaisError::Usage("jacobian estimate needs samples".into()));
    }
    if !(fd_step > 0.0) {
        return Err(AdaisError::Usage(format!(
            "finite-difference step must be positive, got {fd_step}"
        )));
    }
    let d = theta.len();
    let bar = |th: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut buf = vec![0.0; d];
        for (x, lr) in samples {
            evaluate(x, th, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += b * lr;
            }
        }
        let n = samples.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
    };
    let mut jac = DMatrix::zeros(d, d);
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    let mut probe = theta.to_vec();
    for j in 0..d {
        probe[j] = theta[j] + fd_step;
        bar(&probe, &mut plus);
        probe[j] = theta[j] - fd_step;
        bar(&probe, &mut minus);
        probe[j] = theta[j];
        for k in 0..d {
            jac[(k, j)] = (plus[k] - minus[k]) / (2.0 * fd_step);
        }
    }
    Ok(JacobianEstimate::assess(jac, theta.to_vec(), samples.len()))
}

/// Weighted empirical Jacobian from an analytic per-sample derivative.
pub fn analytic_jacobian<X>(
    samples: &[(X, f64)],
    jacobian: &dyn Fn(&X, &[f64], &mut [f64]),
    theta: &[f64],
) -> Result<JacobianEstimate> {
    if samples.is_empty() {
        return Err(AdaisError::Usage("jacobian estimate needs samples".into()));
    }
    let d = theta.len();
    let mut acc = vec![0.0; d * d];
    let mut buf = vec![0.0; d * d];
    for (x, lr) in samples {
        jacobian(x, theta, &mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b * lr;
        }
    }
    let n = samples.len() as f64;
    let jac = DMatrix::from_fn(d, d, |k, j| acc[k * d + j] / n);
    Ok(JacobianEstimate::assess(jac, theta.to_vec(), samples.len()))
}

/// `∇g' J^{-T} Σ J^{-1} ∇g`: asymptotic variance of a scalar performance
/// function of the root estimate.
pub fn delta_method_variance(
    jacobian: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    grad_g: &[f64],
) -> Result<f64> {
    let d = grad_g.len();
    if jacobian.nrows() != d || jacobian.ncols() != d || sigma.nrows() != d || sigma.ncols() != d {
        return Err(AdaisError::Config(format!(
            "delta method dimension mismatch: J {}x{}, Sigma {}x{}, grad {d}",
            jacobian.nrows(),
            jacobian.ncols(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let lu = jacobian.clone().lu();
    let y = lu
        .solve(&DVector::from_column_slice(grad_g))
        .ok_or_else(|| AdaisError::Decomposition("singular Jacobian in delta method".into()))?;
    let v = (sigma * &y).dot(&y);
    Ok(v.max(0.0))
}

/// Re-solve / Jacobian-refresh cadence for the d-dimensional engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefitCadence {
    /// Refit when `n % k == 0` (and always at the final iteration).
    Every(u64),
    /// Refit at powers of two (and at the final iteration): an n-iteration
    /// run costs O(n) objective evaluations overall.
    Doubling,
}

impl RefitCadence {
    fn due(&self, n: u64, budget: u64) -> bool {
        n == budget
            || match self {
                RefitCadence::Every(k) => n % (*k).max(1) == 0,
                RefitCadence::Doubling => n.is_power_of_two(),
            }
    }
}

/// Configuration for the d-dimensional engines.
#[derive(Clone)]
pub struct MdRunConfig {
    pub solver: SolverKind,
    pub budget: u64,
    pub seed: RunSeed,
    pub theta0: Vec<f64>,
    pub alpha1: Option<Vec<f64>>,
    pub truncation: Option<TruncationSchedule>,
    pub stepsize: Option<StepsizeSchedule>,
    pub projection: Option<IntervalBox>,
    pub refit: RefitCadence,
    /// Finite-difference step for Jacobian estimates when the problem has
    /// no analytic derivative; defaults to `1e-5 * max(1, |θ₀|_∞)`.
    pub fd_step: Option<f64>,
    pub keep_path: bool,
    /// Estimate the final Jacobian and the trailing-half covariance of
    /// `F(X_i, θ̂_N) ℓ_i` into the trace (needs retained samples).
    pub estimate_moments: bool,
}

impl MdRunConfig {
    pub fn saa(theta0: Vec<f64>, budget: u64, seed: RunSeed) -> Self {
        Self {
            solver: SolverKind::Saa,
            budget,
            seed,
            theta0,
            alpha1: None,
            truncation: None,
            stepsize: None,
            projection: None,
            refit: RefitCadence::Every(1),
            fd_step: None,
            keep_path: true,
            estimate_moments: false,
        }
    }

    pub fn sa(
        solver: SolverKind,
        stepsize: StepsizeSchedule,
        projection: IntervalBox,
        theta0: Vec<f64>,
        budget: u64,
        seed: RunSeed,
    ) -> Self {
        Self {
            solver,
            budget,
            seed,
            theta0,
            alpha1: None,
            truncation: None,
            stepsize: Some(stepsize),
            projection: Some(projection),
            refit: RefitCadence::Doubling,
            fd_step: None,
            keep_path: true,
            estimate_moments: false,
        }
    }
}

/// Record of one d-dimensional adaptive run.
#[derive(Debug, Clone)]
pub struct VectorRunTrace {
    pub n: u64,
    pub final_estimate: Vec<f64>,
    pub iterates: Vec<Vec<f64>>,
    pub is_params: Vec<Vec<f64>>,
    pub flags: TraceFlags,
    /// Final-sample Jacobian estimate (when `estimate_moments`).
    pub jacobian: Option<JacobianEstimate>,
    /// Trailing-half covariance of `F(X_i, θ̂_N) ℓ_i` (when `estimate_moments`).
    pub sigma: Option<DMatrix<f64>>,
}

fn initial_alpha_md<F: VectorIsFamily>(family: &F, cfg: &MdRunConfig) -> Vec<f64> {
    let mut alpha = match &cfg.alpha1 {
        Some(a) => a.clone(),
        None => family.selector(&cfg.theta0, None),
    };
    if let Some(tr) = &cfg.truncation {
        tr.set_at(1).project_in_place(&mut alpha);
    }
    alpha
}

struct MomentEstimator<'a, X> {
    problem: &'a VectorRootProblem<X>,
    fd_step: f64,
}

impl<X> MomentEstimator<'_, X> {
    fn jacobian(&self, samples: &[(X, f64)], theta: &[f64]) -> Result<JacobianEstimate> {
        match &self.problem.jacobian {
            Some(jac) => analytic_jacobian(samples, jac.as_ref(), theta),
            None => estimate_jacobian(samples, self.problem.evaluate.as_ref(), theta, self.fd_step),
        }
    }

    /// Sample covariance of `F(x_i, θ) ℓ_i` over the trailing half.
    fn sigma(&self, samples: &[(X, f64)], theta: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.problem.dim;
        let start = samples.len() / 2;
        let tail = &samples[start..];
        if tail.len() < 2 {
            return Err(AdaisError::Usage(
                "covariance estimate needs at least two trailing samples".into(),
            ));
        }
        let mut rows = Vec::with_capacity(tail.len());
        let mut buf = vec![0.0; d];
        let mut mean = vec![0.0; d];
        for (x, lr) in tail {
            (self.problem.evaluate)(x, theta, &mut buf);
            let row: Vec<f64> = buf.iter().map(|b| b * lr).collect();
            for (m, r) in mean.iter_mut().zip(&row) {
                *m += r;
            }
            rows.push(row);
        }
        let m = tail.len() as f64;
        mean.iter_mut().for_each(|v| *v /= m);
        let mut cov = DMatrix::zeros(d, d);
        for row in &rows {
            for i in 0..d {
                for j in 0..d {
                    cov[(i, j)] += (row[i] - mean[i]) * (row[j] - mean[j]);
                }
            }
        }
        cov /= m - 1.0;
        Ok(cov)
    }
}

fn default_fd_step(theta: &[f64]) -> f64 {
    let scale = theta.iter().fold(0.0f64, |acc, t| acc.max(t.abs()));
    1e-5 * scale.max(1.0)
}

/// SAA with adaptive IS in `R^d`: retain every weighted sample, re-solve
/// the weighted empirical system by damped Newton at the refit cadence,
/// and re-tilt through `I(θ̂_n, Ĵ_n)`.
pub fn run_saa_adaptive_md<F: VectorIsFamily>(
    problem: &VectorRootProblem<F::Point>,
    family: &F,
    cfg: &MdRunConfig,
) -> Result<VectorRunTrace> {
    validate_md(problem, &cfg.theta0, cfg.budget)?;
    let d = problem.dim;
    let mut rng = cfg.seed.rng();
    let mut flags = TraceFlags::default();
    let mut retained: Vec<(F::Point, f64)> = Vec::with_capacity(cfg.budget as usize);
    let mut scalar_candidates: Vec<f64> = Vec::new();
    let mut theta = cfg.theta0.clone();
    let mut alpha = initial_alpha_md(family, cfg);
    let mut iterates = Vec::new();
    let mut is_params = Vec::new();
    let mut last_good_jac: Option<JacobianEstimate> = None;
    let moments = MomentEstimator {
        problem,
        fd_step: cfg.fd_step.unwrap_or_else(|| default_fd_step(&cfg.theta0)),
    };

    for n in 1..=cfg.budget {
        let x = family.sample(&alpha, &mut rng)?;
        let log_lr = family.log_likelihood_ratio(&x, &alpha);
        let lr = log_lr.exp();
        if !lr.is_finite() {
            return Err(AdaisError::Solver {
                iteration: n,
                message: format!("non-finite likelihood ratio (log {log_lr})"),
            });
        }
        if lr == 0.0 {
            flags.zero_likelihood_ratio += 1;
        }
        if d == 1 {
            scalar_candidates.push(family.point_value(&x));
        }
        retained.push((x, lr));

        if cfg.refit.due(n, cfg.budget) {
            if d == 1 {
                // Same inner solver as the scalar engine: the d = 1
                // embedding is the scalar path.
                let g = |th: f64| -> f64 {
                    let mut buf = [0.0];
                    retained
                        .iter()
                        .map(|(x, lr)| {
                            (problem.evaluate)(x, &[th], &mut buf);
                            buf[0] * lr
                        })
                        .sum::<f64>()
                        / n as f64
                        - problem.target[0]
                };
                let mut snap = scalar_candidates.clone();
                snap.sort_by(f64::total_cmp);
                theta[0] = expand_and_solve(&g, theta[0], problem.target[0], Some(&snap))
                    .map_err(|e| AdaisError::Solver {
                        iteration: n,
                        message: e.to_string(),
                    })?;
            } else {
                let (next, fell_back) = newton_solve(problem, &retained, &theta, moments.fd_step)?;
                if fell_back {
                    flags.solver_fallback += 1;
                }
                theta = next;
            }
            if family.selector_uses_jacobian() {
                let jac = moments.jacobian(&retained, &theta)?;
                if jac.ill_conditioned {
                    flags.solver_fallback += 1;
                } else {
                    last_good_jac = Some(jac);
                }
            }
        }
        if cfg.keep_path {
            iterates.push(theta.clone());
            is_params.push(alpha.clone());
        }
        let mut proposed = family.selector(&theta, last_good_jac.as_ref());
        if let Some(tr) = &cfg.truncation {
            tr.set_at(n + 1).project_in_place(&mut proposed);
        }
        alpha = proposed;
    }

    let (jacobian, sigma) = if cfg.estimate_moments {
        (
            Some(moments.jacobian(&retained, &theta)?),
            Some(moments.sigma(&retained, &theta)?),
        )
    } else {
        (None, None)
    };
    Ok(VectorRunTrace {
        n: cfg.budget,
        final_estimate: theta,
        iterates,
        is_params,
        flags,
        jacobian,
        sigma,
    })
}

/// SA with adaptive IS in `R^d`: one projected componentwise step per
/// sample; the Jacobian estimate (when the selector wants one) refreshes at
/// the refit cadence from all retained samples.
pub fn run_sa_adaptive_md<F: VectorIsFamily>(
    problem: &VectorRootProblem<F::Point>,
    family: &F,
    cfg: &MdRunConfig,
) -> Result<VectorRunTrace> {
    validate_md(problem, &cfg.theta0, cfg.budget)?;
    let d = problem.dim;
    let stepsize = cfg
        .stepsize
        .ok_or_else(|| AdaisError::Config("SA run needs a stepsize schedule".into()))?;
    let projection = cfg
        .projection
        .clone()
        .ok_or_else(|| AdaisError::Config("SA run needs a projection box".into()))?;
    if projection.dim() != d {
        return Err(AdaisError::Config(format!(
            "projection box dim {} must equal problem dim {d}",
            projection.dim()
        )));
    }
    let burn_in = match cfg.solver {
        SolverKind::RmSa => {
            if stepsize.exponent != 1.0 {
                return Err(AdaisError::Config(format!(
                    "RM-SA uses γ/n (exponent 1), got exponent {}",
                    stepsize.exponent
                )));
            }
            None
        }
        SolverKind::PrSa { burn_in } => {
            if stepsize.exponent >= 1.0 {
                return Err(AdaisError::Config(format!(
                    "PR-SA needs a stepsize exponent in (1/2, 1), got {}",
                    stepsize.exponent
                )));
            }
            Some(burn_in)
        }
        SolverKind::Saa => return Err(AdaisError::Config("SAA is not an SA solver".into())),
    };

    let retain = family.selector_uses_jacobian() || cfg.estimate_moments;
    let mut rng = cfg.seed.rng();
    let mut flags = TraceFlags::default();
    let mut retained: Vec<(F::Point, f64)> = Vec::new();
    let mut theta = cfg.theta0.clone();
    let mut alpha = initial_alpha_md(family, cfg);
    let mut avg = theta.clone();
    let mut avg_sum = vec![0.0; d];
    let mut iterates = Vec::new();
    let mut is_params = Vec::new();
    let mut buf = vec![0.0; d];
    let mut last_good_jac: Option<JacobianEstimate> = None;
    let moments = MomentEstimator {
        problem,
        fd_step: cfg.fd_step.unwrap_or_else(|| default_fd_step(&cfg.theta0)),
    };

    for n in 1..=cfg.budget {
        let gamma = stepsize.step(n)?;
        let x = family.sample(&alpha, &mut rng)?;
        let log_lr = family.log_likelihood_ratio(&x, &alpha);
        let lr = log_lr.exp();
        if !lr.is_finite() {
            return Err(AdaisError::Solver {
                iteration: n,
                message: format!("non-finite likelihood ratio (log {log_lr})"),
            });
        }
        if lr == 0.0 {
            flags.zero_likelihood_ratio += 1;
        }
        (problem.evaluate)(&x, &theta, &mut buf);
        for j in 0..d {
            let update = buf[j] * lr - problem.target[j];
            if !update.is_finite() {
                return Err(AdaisError::Solver {
                    iteration: n,
                    message: format!("non-finite SA update in component {j}"),
                });
            }
            theta[j] = (theta[j] - gamma * update).clamp(projection.lo[j], projection.hi[j]);
        }
        if let Some(n0) = burn_in {
            if n > n0 {
                for j in 0..d {
                    avg_sum[j] += theta[j];
                    avg[j] = avg_sum[j] / ((n - n0) as f64);
                }
            } else {
                avg.copy_from_slice(&theta);
            }
        }
        if retain {
            retained.push((x, lr));
        }
        if family.selector_uses_jacobian() && cfg.refit.due(n, cfg.budget) && !retained.is_empty()
        {
            let jac = moments.jacobian(&retained, &theta)?;
            if jac.ill_conditioned {
                flags.solver_fallback += 1;
            } else {
                last_good_jac = Some(jac);
            }
        }
        if cfg.keep_path {
            iterates.push(theta.clone());
            is_params.push(alpha.clone());
        }
        let mut proposed = family.selector(&theta, last_good_jac.as_ref());
        if let Some(tr) = &cfg.truncation {
            tr.set_at(n + 1).project_in_place(&mut proposed);
        }
        alpha = proposed;
    }

    let final_estimate = if burn_in.is_some() { avg } else { theta.clone() };
    let (jacobian, sigma) = if cfg.estimate_moments {
        (
            Some(moments.jacobian(&retained, &final_estimate)?),
            Some(moments.sigma(&retained, &final_estimate)?),
        )
    } else {
        (None, None)
    };
    Ok(VectorRunTrace {
        n: cfg.budget,
        final_estimate,
        iterates,
        is_params,
        flags,
        jacobian,
        sigma,
    })
}

fn validate_md<X>(problem: &VectorRootProblem<X>, theta0: &[f64], budget: u64) -> Result<()> {
    if budget == 0 {
        return Err(AdaisError::Usage("budget must be at least 1".into()));
    }
    if theta0.len() != problem.dim {
        return Err(AdaisError::Config(format!(
            "theta0 length {} must equal problem dim {}",
            theta0.len(),
            problem.dim
        )));
    }
    Ok(())
}

/// Damped Newton on the weighted empirical system; falls back to a
/// diminishing-relaxation fixed point when Newton stalls or the Jacobian
/// goes singular. Returns `(θ̂, fell_back)`.
fn newton_solve<X>(
    problem: &VectorRootProblem<X>,
    samples: &[(X, f64)],
    start: &[f64],
    fd_step: f64,
) -> Result<(Vec<f64>, bool)> {
    let d = problem.dim;
    let n = samples.len() as f64;
    let residual = |th: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut buf = vec![0.0; d];
        for (x, lr) in samples {
            (problem.evaluate)(x, th, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += b * lr;
            }
        }
        for (o, c) in out.iter_mut().zip(&problem.target) {
            *o = *o / n - c;
        }
    };
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let tol = 1e-10
        * problem
            .target
            .iter()
            .fold(1.0f64, |acc, c| acc.max(c.abs()));

    let mut theta = start.to_vec();
    let mut r = vec![0.0; d];
    residual(&theta, &mut r);
    for _ in 0..60 {
        if norm(&r) <= tol {
            return Ok((theta, false));
        }
        let jac = match &problem.jacobian {
            Some(j) => analytic_jacobian(samples, j.as_ref(), &theta)?,
            None => estimate_jacobian(samples, problem.evaluate.as_ref(), &theta, fd_step)?,
        };
        let step = if jac.ill_conditioned {
            None
        } else {
            jac.matrix.lu().solve(&DVector::from_column_slice(&r))
        };
        match step {
            Some(delta) => {
                let mut damping = 1.0;
                let mut improved = false;
                let r_norm = norm(&r);
                let mut trial = vec![0.0; d];
                let mut r_trial = vec![0.0; d];
                for _ in 0..30 {
                    for j in 0..d {
                        trial[j] = theta[j] - damping * delta[j];
                    }
                    residual(&trial, &mut r_trial);
                    if norm(&r_trial) < r_norm {
                        theta.copy_from_slice(&trial);
                        r.copy_from_slice(&r_trial);
                        improved = true;
                        break;
                    }
                    damping *= 0.5;
                }
                if !improved {
                    return relaxation_fallback(problem, samples, theta, r, tol);
                }
            }
            None => {
                return relaxation_fallback(problem, samples, theta, r, tol);
            }
        }
    }
    if norm(&r) <= tol {
        Ok((theta, false))
    } else {
        relaxation_fallback(problem, samples, theta, r, tol)
    }
}

fn relaxation_fallback<X>(
    problem: &VectorRootProblem<X>,
    samples: &[(X, f64)],
    mut theta: Vec<f64>,
    mut r: Vec<f64>,
    tol: f64,
) -> Result<(Vec<f64>, bool)> {
    let d = problem.dim;
    let n = samples.len() as f64;
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let mut buf = vec![0.0; d];
    for k in 0..400u32 {
        if norm(&r) <= tol {
            break;
        }
        let eta = 1.0 / (1.0 + k as f64).sqrt();
        for j in 0..d {
            theta[j] -= eta * r[j];
        }
        r.iter_mut().for_each(|x| *x = 0.0);
        for (x, lr) in samples {
            (problem.evaluate)(x, &theta, &mut buf);
            for (o, b) in r.iter_mut().zip(&buf) {
                *o += b * lr;
            }
        }
        for (o, c) in r.iter_mut().zip(&problem.target) {
            *o = *o / n - c;
        }
    }
    Ok((theta, true))
}

/// Embed a scalar family as a one-dimensional vector family (selector
/// ignores the Jacobian); used to cross-check the d = 1 engines against
/// the scalar ones.
#[derive(Debug, Clone)]
pub struct Scalar1d<F>(pub F);

impl<F: IsFamily> VectorIsFamily for Scalar1d<F> {
    type Point = F::Point;

    fn param_dim(&self) -> usize {
        1
    }
    fn base_param(&self) -> Vec<f64> {
        vec![self.0.base_param()]
    }
    fn selector(&self, theta: &[f64], _jacobian: Option<&JacobianEstimate>) -> Vec<f64> {
        vec![self.0.selector(theta[0])]
    }
    fn sample(&self, alpha: &[f64], rng: &mut RunRng) -> Result<Self::Point> {
        self.0.sample(alpha[0], rng)
    }
    fn log_likelihood_ratio(&self, x: &Self::Point, alpha: &[f64]) -> f64 {
        self.0.log_likelihood_ratio(x, alpha[0])
    }
    fn point_value(&self, x: &Self::Point) -> f64 {
        self.0.point_value(x)
    }
}

/// Mean-shift family over `N(0, I_d)` with a caller-provided selector.
///
/// `ln ℓ(x, α) = -α·x + |α|²/2`.
pub struct GaussianMeanShiftFamily<S> {
    pub dim: usize,
    pub select: S,
    pub uses_jacobian: bool,
}

impl<S> VectorIsFamily for GaussianMeanShiftFamily<S>
where
    S: Fn(&[f64], Option<&JacobianEstimate>) -> Vec<f64> + Sync,
{
    type Point = Vec<f64>;

    fn param_dim(&self) -> usize {
        self.dim
    }
    fn base_param(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }
    fn selector(&self, theta: &[f64], jacobian: Option<&JacobianEstimate>) -> Vec<f64> {
        (self.select)(theta, jacobian)
    }
    fn selector_uses_jacobian(&self) -> bool {
        self.uses_jacobian
    }
    fn sample(&self, alpha: &[f64], rng: &mut RunRng) -> Result<Vec<f64>> {
        if alpha.len() != self.dim || alpha.iter().any(|a| !a.is_finite()) {
            return Err(AdaisError::Domain(format!(
                "gaussian shift must be finite of dim {}, got {alpha:?}",
                self.dim
            )));
        }
        let mut x = Vec::with_capacity(self.dim);
        for a in alpha {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            x.push(z + a);
        }
        Ok(x)
    }
    fn log_likelihood_ratio(&self, x: &Vec<f64>, alpha: &[f64]) -> f64 {
        let mut dot = 0.0;
        let mut norm2 = 0.0;
        for (xi, ai) in x.iter().zip(alpha) {
            dot += ai * xi;
            norm2 += ai * ai;
        }
        -dot + 0.5 * norm2
    }
    fn point_value(&self, x: &Vec<f64>) -> f64 {
        x[0]
    }
}
