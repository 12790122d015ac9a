//! The importance-sampling family abstraction.
//!
//! A family bundles a parametric sampler `P_α`, the log likelihood ratio
//! `ln dP/dP_α`, and a black-box tilt selector `I(θ)` that proposes a good
//! parameter for estimating the expectation at a candidate root `θ`. The
//! solvers never look inside `I`.

use crate::error::{AdaisError, Result};
use crate::math::mean_and_stderr;
use crate::rng::{RunRng, RunSeed};

pub trait IsFamily: Sync {
    /// What one draw from the family looks like.
    type Point;

    /// Parameterization of the base measure `P` inside the family
    /// (`log_likelihood_ratio(x, base_param()) == 0` for all x).
    fn base_param(&self) -> f64;

    /// Admissible open range for the tilt parameter.
    fn param_space(&self) -> (f64, f64);

    /// The black-box tilt selector `I(θ)`.
    fn selector(&self, theta: f64) -> f64;

    /// Draw `x ~ P_α`. Errors when `α` is outside the parameter space.
    fn sample(&self, alpha: f64, rng: &mut RunRng) -> Result<Self::Point>;

    /// `ln (dP/dP_α)(x)`. Kept in the log domain to survive extreme tilts.
    fn log_likelihood_ratio(&self, x: &Self::Point, alpha: f64) -> f64;

    /// Scalar summary of a point recorded in run traces.
    fn point_value(&self, x: &Self::Point) -> f64;

    fn admissible(&self, alpha: f64) -> bool {
        let (lo, hi) = self.param_space();
        lo < alpha && alpha < hi || alpha == self.base_param()
    }
}

/// Wrapper that freezes the selector at a fixed tilt (the "as if the root
/// were known" reference sampler).
#[derive(Debug, Clone)]
pub struct FrozenIs<F> {
    pub inner: F,
    pub alpha: f64,
}

impl<F: IsFamily> IsFamily for FrozenIs<F> {
    type Point = F::Point;

    fn base_param(&self) -> f64 {
        self.inner.base_param()
    }
    fn param_space(&self) -> (f64, f64) {
        self.inner.param_space()
    }
    fn selector(&self, _theta: f64) -> f64 {
        self.alpha
    }
    fn sample(&self, alpha: f64, rng: &mut RunRng) -> Result<Self::Point> {
        self.inner.sample(alpha, rng)
    }
    fn log_likelihood_ratio(&self, x: &Self::Point, alpha: f64) -> f64 {
        self.inner.log_likelihood_ratio(x, alpha)
    }
    fn point_value(&self, x: &Self::Point) -> f64 {
        self.inner.point_value(x)
    }
}

/// Wrapper that never tilts: the selector returns the base parameter, so
/// every likelihood ratio is exactly one and the run is crude Monte Carlo.
#[derive(Debug, Clone)]
pub struct CrudeIs<F> {
    pub inner: F,
}

impl<F: IsFamily> IsFamily for CrudeIs<F> {
    type Point = F::Point;

    fn base_param(&self) -> f64 {
        self.inner.base_param()
    }
    fn param_space(&self) -> (f64, f64) {
        self.inner.param_space()
    }
    fn selector(&self, _theta: f64) -> f64 {
        self.inner.base_param()
    }
    fn sample(&self, alpha: f64, rng: &mut RunRng) -> Result<Self::Point> {
        self.inner.sample(alpha, rng)
    }
    fn log_likelihood_ratio(&self, x: &Self::Point, alpha: f64) -> f64 {
        self.inner.log_likelihood_ratio(x, alpha)
    }
    fn point_value(&self, x: &Self::Point) -> f64 {
        self.inner.point_value(x)
    }
}

/// Monte Carlo check of the unit-mean likelihood-ratio identity.
#[derive(Debug, Clone, Copy)]
pub struct LrCheck {
    pub mean: f64,
    pub stderr: f64,
}

impl LrCheck {
    /// `|mean - 1| <= k * stderr`, with the base-measure case (stderr 0) exact.
    pub fn within_sigmas(&self, k: f64) -> bool {
        (self.mean - 1.0).abs() <= k * self.stderr.max(f64::EPSILON)
    }
}

/// Estimate `E_{X~P_α}[ℓ(X, α)]`, which is exactly 1 for any admissible α.
///
/// Returns the Monte Carlo mean with its standard error; a non-finite
/// likelihood ratio aborts with the offending parameter.
pub fn check_unit_mean_lr<F: IsFamily>(
    family: &F,
    alpha: f64,
    n_mc: usize,
    seed: RunSeed,
) -> Result<LrCheck> {
    if n_mc < 100 {
        return Err(AdaisError::Usage(format!(
            "unit-mean check needs n_mc >= 100, got {n_mc}"
        )));
    }
    let mut rng = seed.rng();
    let mut lrs = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        let x = family.sample(alpha, &mut rng)?;
        let log_lr = family.log_likelihood_ratio(&x, alpha);
        let lr = log_lr.exp();
        if !lr.is_finite() {
            return Err(AdaisError::NumericalOverflow { alpha, log_lr });
        }
        lrs.push(lr);
    }
    let (mean, stderr) = mean_and_stderr(&lrs);
    Ok(LrCheck { mean, stderr })
}
