//! Delta-gamma exponential-twisting importance sampling for portfolio loss,
//! VaR and CVaR.
//!
//! The loss over a short horizon is approximated by the quadratic form
//! `L ≈ a₀ + a'ΔS + ΔS' A ΔS` built from the portfolio Greeks
//! (`a₀ = -Θt`, `a = -δ`, `A = -Γ/2`, fixed by the defining identity
//! `L = Φ(S(0), 0) - Φ(S(t), t)` and validated against exact repricing).
//! Diagonalizing with `ΔS = CZ`, `Z ~ N(0, I)` turns the quadratic form
//! into `Q = b'Z + Z'ΛZ`, whose log-MGF `ψ(α)` is in closed form, so the
//! exponential twist `e^{αQ}` is again Gaussian: `N(μ(α), B(α))` with
//! `B(α) = (I - 2αΛ)^{-1}`, `μ(α) = α B(α) b`, and likelihood ratio
//! `exp(-αQ + ψ(α))`.
//!
//! The twist selector solves `ψ'(I(x)) = x - a₀`, minimizing the Chernoff
//! upper bound on the second moment of the tail estimator; the same bound
//! inverts into deterministic VaR brackets used as SA projection sets.
//!
//! Estimation always reprices exactly: the quadratic form only drives the
//! sampler, never the estimate.

use crate::engines::{run_adaptive, AdaptiveRunConfig, SolverKind};
use crate::error::{AdaisError, Result};
use crate::family::IsFamily;
use crate::math::{normal_cdf, normal_pdf, normal_quantile};
use crate::problem::{QuantileProblem, ScalarProblem, Tail};
use crate::rng::{stream_id, RunRng, RunSeed};
use crate::schedule::{Interval, StepsizeSchedule, TruncationSchedule};
use crate::trace::{RunTrace, TraceSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

/// Black-Scholes price and the Greeks the delta-gamma model needs.
/// `theta` is the calendar-time derivative `∂V/∂t` (negative for long
/// vanilla options).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsGreeks {
    pub price: f64,
    pub delta: f64,
    pub gamma: f64,
    pub theta: f64,
}

/// Black–Scholes price, delta, gamma and theta; puts via parity.
pub fn black_scholes(
    s: f64,
    k: f64,
    r: f64,
    sigma: f64,
    tau: f64,
    kind: OptionKind,
) -> Result<BsGreeks> {
    if !(s > 0.0 && k > 0.0 && sigma > 0.0 && tau > 0.0) {
        return Err(AdaisError::Domain(format!(
            "Black-Scholes needs positive S, K, sigma, tau; got ({s}, {k}, {sigma}, {tau})"
        )));
    }
    let sqrt_tau = tau.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * tau) / (sigma * sqrt_tau);
    let d2 = d1 - sigma * sqrt_tau;
    let disc_k = k * (-r * tau).exp();
    let call_price = s * normal_cdf(d1) - disc_k * normal_cdf(d2);
    let gamma = normal_pdf(d1) / (s * sigma * sqrt_tau);
    let call_theta = -s * normal_pdf(d1) * sigma / (2.0 * sqrt_tau) - r * disc_k * normal_cdf(d2);
    Ok(match kind {
        OptionKind::Call => BsGreeks {
            price: call_price,
            delta: normal_cdf(d1),
            gamma,
            theta: call_theta,
        },
        OptionKind::Put => BsGreeks {
            price: call_price - s + disc_k,
            delta: normal_cdf(d1) - 1.0,
            gamma,
            theta: call_theta + r * disc_k,
        },
    })
}

/// Price only (hot path for repricing losses).
fn bs_price(s: f64, k: f64, r: f64, sigma: f64, tau: f64, kind: OptionKind) -> f64 {
    let sqrt_tau = tau.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * tau) / (sigma * sqrt_tau);
    let d2 = d1 - sigma * sqrt_tau;
    let disc_k = k * (-r * tau).exp();
    let call = s * normal_cdf(d1) - disc_k * normal_cdf(d2);
    match kind {
        OptionKind::Call => call,
        OptionKind::Put => call - s + disc_k,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssetSpec {
    pub s0: f64,
    pub vol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    /// Index into `assets`.
    pub asset: usize,
    pub kind: OptionKind,
    pub strike: f64,
    /// Time to maturity from today, in years.
    pub maturity: f64,
    /// Signed count; negative is short.
    pub quantity: f64,
}

/// Market and position description; `ΔS` over the horizon is modeled as
/// `N(0, Σ)` with `Σ_ij = vol_i s0_i vol_j s0_j ρ_ij t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSpec {
    pub assets: Vec<AssetSpec>,
    /// Correlation of ΔS; `None` means uncorrelated.
    pub correlation: Option<Vec<Vec<f64>>>,
    /// Risk-free rate.
    pub rate: f64,
    /// Risk horizon in years.
    pub horizon: f64,
    pub positions: Vec<Position>,
}

impl PortfolioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.assets.is_empty() {
            return Err(AdaisError::Config("portfolio needs assets".into()));
        }
        if !(self.horizon > 0.0) || !self.rate.is_finite() {
            return Err(AdaisError::Config(format!(
                "bad horizon {} or rate {}",
                self.horizon, self.rate
            )));
        }
        for a in &self.assets {
            if !(a.s0 > 0.0 && a.vol > 0.0) {
                return Err(AdaisError::Config(format!(
                    "asset needs positive s0 and vol, got {a:?}"
                )));
            }
        }
        for p in &self.positions {
            if p.asset >= self.assets.len() {
                return Err(AdaisError::Config(format!(
                    "position references asset {} of {}",
                    p.asset,
                    self.assets.len()
                )));
            }
            if !(p.strike > 0.0 && p.maturity > self.horizon) || !p.quantity.is_finite() {
                return Err(AdaisError::Config(format!(
                    "position needs positive strike and maturity beyond the horizon: {p:?}"
                )));
            }
        }
        if let Some(c) = &self.correlation {
            let m = self.assets.len();
            if c.len() != m || c.iter().any(|row| row.len() != m) {
                return Err(AdaisError::Config("correlation must be m x m".into()));
            }
            for i in 0..m {
                if (c[i][i] - 1.0).abs() > 1e-12 {
                    return Err(AdaisError::Config("correlation diagonal must be 1".into()));
                }
                for j in 0..m {
                    if (c[i][j] - c[j][i]).abs() > 1e-12 {
                        return Err(AdaisError::Config("correlation must be symmetric".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Covariance of `ΔS` over the horizon.
    pub fn delta_s_covariance(&self) -> DMatrix<f64> {
        let m = self.assets.len();
        let scale: Vec<f64> = self
            .assets
            .iter()
            .map(|a| a.vol * a.s0 * self.horizon.sqrt())
            .collect();
        DMatrix::from_fn(m, m, |i, j| {
            let rho = match &self.correlation {
                Some(c) => c[i][j],
                None => {
                    if i == j {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            scale[i] * scale[j] * rho
        })
    }

    /// The ten-asset short-option benchmark: ten uncorrelated assets at 100
    /// with 30% vol; short 10 at-the-money calls and 5 at-the-money puts on
    /// each, half-year maturity, 10-day horizon, 5% rate.
    pub fn ten_asset_benchmark() -> Self {
        let assets = vec![AssetSpec { s0: 100.0, vol: 0.3 }; 10];
        let mut positions = Vec::new();
        for i in 0..10 {
            positions.push(Position {
                asset: i,
                kind: OptionKind::Call,
                strike: 100.0,
                maturity: 0.5,
                quantity: -10.0,
            });
            positions.push(Position {
                asset: i,
                kind: OptionKind::Put,
                strike: 100.0,
                maturity: 0.5,
                quantity: -5.0,
            });
        }
        Self {
            assets,
            correlation: None,
            rate: 0.05,
            horizon: 0.04,
            positions,
        }
    }
}

/// Diagonalized delta-gamma loss model `L ≈ a₀ + Q`,
/// `Q = b'Z + Z'ΛZ`, `ΔS = CZ`.
#[derive(Debug, Clone)]
pub struct QuadraticFormModel {
    pub a0: f64,
    pub b: DVector<f64>,
    pub lambda: DVector<f64>,
    /// Factor matrix with `CC' = Σ` and `C'AC = Λ`.
    pub c: DMatrix<f64>,
    /// Linear loss coefficient `a = -δ` in ΔS coordinates.
    pub a: DVector<f64>,
}

impl QuadraticFormModel {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// `Q(z) = b'z + z'Λz`.
    pub fn q_of_z(&self, z: &[f64]) -> f64 {
        let mut q = 0.0;
        for i in 0..z.len() {
            q += self.b[i] * z[i] + self.lambda[i] * z[i] * z[i];
        }
        q
    }

    /// `ΔS = Cz`.
    pub fn delta_s_of_z(&self, z: &[f64]) -> Vec<f64> {
        let zv = DVector::from_column_slice(z);
        (&self.c * zv).data.into()
    }

    /// Open admissible twist range: `1 - 2αλ_i > 0` for all i.
    pub fn admissible_range(&self) -> (f64, f64) {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for &l in self.lambda.iter() {
            if l > 0.0 {
                hi = hi.min(0.5 / l);
            } else if l < 0.0 {
                lo = lo.max(0.5 / l);
            }
        }
        (lo, hi)
    }

    pub fn admissible(&self, alpha: f64) -> bool {
        let (lo, hi) = self.admissible_range();
        alpha.is_finite() && lo < alpha && alpha < hi
    }

    /// `E[Q] = Σ λ_i`.
    pub fn mean_q(&self) -> f64 {
        self.lambda.iter().sum()
    }

    /// `Var(Q) = Σ (b_i² + 2λ_i²)`.
    pub fn var_q(&self) -> f64 {
        self.b
            .iter()
            .zip(self.lambda.iter())
            .map(|(b, l)| b * b + 2.0 * l * l)
            .sum()
    }

    /// Log-MGF of `Q`:
    /// `ψ(α) = Σ [ α²b_i² / (2(1-2αλ_i)) - ½ ln(1-2αλ_i) ]`.
    pub fn psi(&self, alpha: f64) -> Result<f64> {
        self.check_domain(alpha)?;
        let mut acc = 0.0;
        for (b, l) in self.b.iter().zip(self.lambda.iter()) {
            let u = 1.0 - 2.0 * alpha * l;
            acc += 0.5 * alpha * alpha * b * b / u - 0.5 * u.ln();
        }
        Ok(acc)
    }

    /// `ψ'(α) = Σ [ b_i² α(1-αλ_i) / (1-2αλ_i)² + λ_i / (1-2αλ_i) ]`.
    pub fn psi_prime(&self, alpha: f64) -> Result<f64> {
        self.check_domain(alpha)?;
        let mut acc = 0.0;
        for (b, l) in self.b.iter().zip(self.lambda.iter()) {
            let u = 1.0 - 2.0 * alpha * l;
            acc += b * b * alpha * (1.0 - alpha * l) / (u * u) + l / u;
        }
        Ok(acc)
    }

    /// `ψ''(α) = Σ [ b_i² / (1-2αλ_i)³ + 2λ_i² / (1-2αλ_i)² ]` (> 0:
    /// ψ is strictly convex on its domain).
    pub fn psi_second(&self, alpha: f64) -> Result<f64> {
        self.check_domain(alpha)?;
        let mut acc = 0.0;
        for (b, l) in self.b.iter().zip(self.lambda.iter()) {
            let u = 1.0 - 2.0 * alpha * l;
            acc += b * b / (u * u * u) + 2.0 * l * l / (u * u);
        }
        Ok(acc)
    }

    fn check_domain(&self, alpha: f64) -> Result<()> {
        if !self.admissible(alpha) {
            let (lo, hi) = self.admissible_range();
            return Err(AdaisError::Domain(format!(
                "twist {alpha} outside admissible ({lo}, {hi})"
            )));
        }
        Ok(())
    }

    /// Twisted sampling distribution of `Z`: independent components
    /// `N(μ_i(α), B_ii(α))` with `B = (I-2αΛ)^{-1}`, `μ = αBb`.
    pub fn twisted_gaussian(&self, alpha: f64) -> Result<TwistedGaussian> {
        self.check_domain(alpha)?;
        let m = self.dim();
        let mut mu = Vec::with_capacity(m);
        let mut var = Vec::with_capacity(m);
        for (b, l) in self.b.iter().zip(self.lambda.iter()) {
            let u = 1.0 - 2.0 * alpha * l;
            var.push(1.0 / u);
            mu.push(alpha * b / u);
        }
        Ok(TwistedGaussian {
            alpha,
            mu,
            variance: var,
        })
    }
}

/// The twisted Gaussian measure on `Z` induced by `e^{αQ}` tilting.
#[derive(Debug, Clone)]
pub struct TwistedGaussian {
    pub alpha: f64,
    pub mu: Vec<f64>,
    /// Diagonal of `B(α)`; positive on the admissible domain.
    pub variance: Vec<f64>,
}

/// Result of the first-order twist equation `ψ'(α) = x - a₀`.
#[derive(Debug, Clone, Copy)]
pub struct TwistSolution {
    pub alpha: f64,
    /// Target was outside the attainable range of `ψ'`; `alpha` sits at the
    /// inset domain boundary.
    pub saturated: bool,
}

const TWIST_BOUNDARY_INSET: f64 = 1e-6;

fn domain_inset(model: &QuadraticFormModel) -> (f64, f64) {
    let (lo, hi) = model.admissible_range();
    let lo_in = if lo.is_finite() {
        lo + TWIST_BOUNDARY_INSET * lo.abs().max(1.0)
    } else {
        f64::NEG_INFINITY
    };
    let hi_in = if hi.is_finite() {
        hi - TWIST_BOUNDARY_INSET * hi.abs().max(1.0)
    } else {
        f64::INFINITY
    };
    (lo_in, hi_in)
}

/// Solve `ψ'(α) = x - a₀` for the twist that centers the sampler on loss
/// level `x`. Unique by strict convexity of ψ; safeguarded Newton with a
/// bisection bracket. Saturates (with a flag) at the inset boundary when
/// the target is outside the attainable range.
pub fn twist_selector(model: &QuadraticFormModel, x: f64) -> Result<TwistSolution> {
    let target = x - model.a0;
    if !target.is_finite() {
        return Err(AdaisError::Domain(format!("twist target {target}")));
    }
    let (lo_in, hi_in) = domain_inset(model);
    // Finite working bracket: expand from 0 toward the (possibly infinite)
    // domain edges until ψ' straddles the target.
    let mut lo = if lo_in.is_finite() { lo_in } else { -1.0 };
    let mut hi = if hi_in.is_finite() { hi_in } else { 1.0 };
    let mut expansions = 0;
    while model.psi_prime(lo)? > target {
        if lo_in.is_finite() {
            return Ok(TwistSolution {
                alpha: lo_in,
                saturated: true,
            });
        }
        lo *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(AdaisError::Solver {
                iteration: 0,
                message: "twist bracket expansion diverged".into(),
            });
        }
    }
    while model.psi_prime(hi)? < target {
        if hi_in.is_finite() {
            return Ok(TwistSolution {
                alpha: hi_in,
                saturated: true,
            });
        }
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(AdaisError::Solver {
                iteration: 0,
                message: "twist bracket expansion diverged".into(),
            });
        }
    }
    let tol = 1e-10 * target.abs().max(1.0);
    let mut alpha = 0.5 * (lo + hi);
    if alpha <= lo || alpha >= hi {
        alpha = lo;
    }
    for _ in 0..200 {
        let resid = model.psi_prime(alpha)? - target;
        if resid.abs() <= tol {
            return Ok(TwistSolution {
                alpha,
                saturated: false,
            });
        }
        if resid > 0.0 {
            hi = alpha;
        } else {
            lo = alpha;
        }
        let newton = alpha - resid / model.psi_second(alpha)?;
        alpha = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(TwistSolution {
        alpha,
        saturated: false,
    })
}

/// One draw under the twisted measure.
#[derive(Debug, Clone)]
pub struct TwistSample {
    pub delta_s: Vec<f64>,
    pub q: f64,
    pub log_lr: f64,
}

/// Draw `Z ~ N(μ(α), B(α))`, map `ΔS = CZ`, and attach
/// `ln ℓ = -αQ + ψ(α)`.
pub fn sample_twisted(
    model: &QuadraticFormModel,
    alpha: f64,
    rng: &mut RunRng,
) -> Result<TwistSample> {
    let tg = model.twisted_gaussian(alpha)?;
    let psi = model.psi(alpha)?;
    let mut z = Vec::with_capacity(model.dim());
    for i in 0..model.dim() {
        let g: f64 = rng.sample(rand_distr::StandardNormal);
        z.push(tg.mu[i] + tg.variance[i].sqrt() * g);
    }
    let q = model.q_of_z(&z);
    Ok(TwistSample {
        delta_s: model.delta_s_of_z(&z),
        q,
        log_lr: -alpha * q + psi,
    })
}

/// Chernoff bound on the tail estimator's second moment:
/// `E_α[1{L > x} ℓ²] <= exp(2ψ(α) - 2α(x - a₀))`.
pub fn m2_upper_bound(model: &QuadraticFormModel, x: f64, alpha: f64) -> Result<f64> {
    Ok((2.0 * model.psi(alpha)? - 2.0 * alpha * (x - model.a0)).exp())
}

/// Build the diagonalized quadratic form from portfolio Greeks:
/// Cholesky `Σ = C₀C₀'`, symmetric eigendecomposition `C₀'AC₀ = UΛU'`
/// (eigenvalues sorted descending for reproducibility), `C = C₀U`,
/// `b = C'a`.
pub fn build_quadratic_form(spec: &PortfolioSpec) -> Result<QuadraticFormModel> {
    spec.validate()?;
    let m = assets_len(spec);
    let mut theta_total = 0.0;
    let mut delta = DVector::zeros(m);
    let mut gamma = DMatrix::zeros(m, m);
    for pos in &spec.positions {
        let asset = &spec.assets[pos.asset];
        let greeks = black_scholes(
            asset.s0,
            pos.strike,
            spec.rate,
            asset.vol,
            pos.maturity,
            pos.kind,
        )?;
        theta_total += pos.quantity * greeks.theta;
        delta[pos.asset] += pos.quantity * greeks.delta;
        gamma[(pos.asset, pos.asset)] += pos.quantity * greeks.gamma;
    }
    let a0 = -theta_total * spec.horizon;
    let a = -delta;
    let a_mat = -0.5 * gamma;

    let sigma = spec.delta_s_covariance();
    let chol = nalgebra::Cholesky::new(sigma)
        .ok_or_else(|| AdaisError::Decomposition("ΔS covariance is not positive definite".into()))?;
    let c0 = chol.l();
    let inner = c0.transpose() * &a_mat * &c0;
    let eig = nalgebra::SymmetricEigen::new(inner);
    // Deterministic descending eigenvalue order.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        let (a, b): (f64, f64) = (eig.eigenvalues[j], eig.eigenvalues[i]);
        a.total_cmp(&b)
    });
    let lambda = DVector::from_fn(m, |i, _| eig.eigenvalues[order[i]]);
    let u = DMatrix::from_fn(m, m, |r, ci| eig.eigenvectors[(r, order[ci])]);
    let c = c0 * u;
    let b = c.transpose() * &a;
    Ok(QuadraticFormModel { a0, b, lambda, c, a })
}

fn assets_len(spec: &PortfolioSpec) -> usize {
    spec.assets.len()
}

/// Exact repricer: portfolio value today and after a risk-factor move.
#[derive(Debug, Clone)]
pub struct PortfolioPricer {
    spec: PortfolioSpec,
    value0: f64,
}

impl PortfolioPricer {
    pub fn new(spec: &PortfolioSpec) -> Result<Self> {
        spec.validate()?;
        let mut value0 = 0.0;
        for pos in &spec.positions {
            let asset = &spec.assets[pos.asset];
            value0 += pos.quantity
                * bs_price(
                    asset.s0,
                    pos.strike,
                    spec.rate,
                    asset.vol,
                    pos.maturity,
                    pos.kind,
                );
        }
        Ok(Self {
            spec: spec.clone(),
            value0,
        })
    }

    pub fn value0(&self) -> f64 {
        self.value0
    }

    /// `L = Φ(S(0), 0) - Φ(S(0) + ΔS, t)`: options reprice at the moved
    /// spot with the horizon taken off their maturities.
    pub fn loss(&self, delta_s: &[f64]) -> f64 {
        let mut value_t = 0.0;
        for pos in &self.spec.positions {
            let asset = &self.spec.assets[pos.asset];
            // A Gaussian ΔS can formally push the spot non-positive;
            // floor it (the event is ~17σ out for the benchmark).
            let s_t = (asset.s0 + delta_s[pos.asset]).max(1e-8 * asset.s0);
            value_t += pos.quantity
                * bs_price(
                    s_t,
                    pos.strike,
                    self.spec.rate,
                    asset.vol,
                    pos.maturity - self.spec.horizon,
                    pos.kind,
                );
        }
        self.value0 - value_t
    }
}

/// Sample point of the portfolio loss family: the quadratic form value
/// drives the likelihood ratio, the exactly repriced loss drives the
/// estimate.
#[derive(Debug, Clone, Copy)]
pub struct LossSample {
    pub q: f64,
    pub loss: f64,
}

/// Scalar tilt family over portfolio losses: sample ΔS under the
/// delta-gamma twist, reprice exactly, and weight by
/// `ℓ = exp(-αQ + ψ(α))`.
pub struct PortfolioLossFamily {
    pub model: QuadraticFormModel,
    pub pricer: PortfolioPricer,
    saturation_count: AtomicU64,
}

impl PortfolioLossFamily {
    pub fn new(spec: &PortfolioSpec) -> Result<Self> {
        Ok(Self {
            model: build_quadratic_form(spec)?,
            pricer: PortfolioPricer::new(spec)?,
            saturation_count: AtomicU64::new(0),
        })
    }

    /// How often the twist selector saturated at its domain boundary.
    pub fn saturations(&self) -> u64 {
        self.saturation_count.load(Ordering::Relaxed)
    }
}

impl IsFamily for PortfolioLossFamily {
    type Point = LossSample;

    fn base_param(&self) -> f64 {
        0.0
    }

    fn param_space(&self) -> (f64, f64) {
        self.model.admissible_range()
    }

    fn selector(&self, theta: f64) -> f64 {
        match twist_selector(&self.model, theta) {
            Ok(sol) => {
                if sol.saturated {
                    self.saturation_count.fetch_add(1, Ordering::Relaxed);
                }
                sol.alpha
            }
            Err(_) => {
                self.saturation_count.fetch_add(1, Ordering::Relaxed);
                0.0
            }
        }
    }

    fn sample(&self, alpha: f64, rng: &mut RunRng) -> Result<LossSample> {
        let tw = sample_twisted(&self.model, alpha, rng)?;
        let loss = self.pricer.loss(&tw.delta_s);
        Ok(LossSample { q: tw.q, loss })
    }

    fn log_likelihood_ratio(&self, x: &LossSample, alpha: f64) -> f64 {
        if alpha == 0.0 {
            return 0.0;
        }
        match self.model.psi(alpha) {
            Ok(psi) => -alpha * x.q + psi,
            Err(_) => f64::NAN,
        }
    }

    fn point_value(&self, x: &LossSample) -> f64 {
        x.loss
    }
}

/// Deterministic VaR brackets from the Chernoff bound
/// `P(L > x) <= exp(ψ(α) - α(x - a₀))`: the upper edge is the smallest x
/// whose optimized bound drops to `1 - p`; the lower edge mirrors it
/// through the twist of `-Q` (α < 0). The brackets contain the
/// delta-gamma VaR.
pub fn var_truncation_bounds(model: &QuadraticFormModel, p: f64) -> Result<Interval> {
    if !(0.0 < p && p < 1.0) {
        return Err(AdaisError::Domain(format!("p must lie in (0,1), got {p}")));
    }
    let mean_loss = model.a0 + model.mean_q();
    let sd = model.var_q().sqrt().max(1e-12);

    // Optimized log-bound for the upper tail at level x (α >= 0).
    let upper_log_bound = |x: f64| -> Result<f64> {
        let sol = twist_selector(model, x)?;
        let alpha = sol.alpha.max(0.0);
        if alpha == 0.0 {
            return Ok(0.0);
        }
        Ok(model.psi(alpha)? - alpha * (x - model.a0))
    };
    // Optimized log-bound for the lower tail at level x (α <= 0).
    let lower_log_bound = |x: f64| -> Result<f64> {
        let sol = twist_selector(model, x)?;
        let alpha = sol.alpha.min(0.0);
        if alpha == 0.0 {
            return Ok(0.0);
        }
        Ok(model.psi(alpha)? - alpha * (x - model.a0))
    };

    // Upper edge: smallest x with bound(x) <= ln(1-p); the bound decreases
    // in x past the mean.
    let target_up = (1.0 - p).ln();
    let mut hi = mean_loss + sd;
    let mut grow = sd;
    while upper_log_bound(hi)? > target_up {
        grow *= 2.0;
        hi = mean_loss + grow;
        if grow > 1e9 * sd {
            return Err(AdaisError::Solver {
                iteration: 0,
                message: "upper VaR bracket diverged".into(),
            });
        }
    }
    let mut lo = mean_loss;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if upper_log_bound(mid)? <= target_up {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-9 * hi.abs().max(1.0) {
            break;
        }
    }
    let q_max = hi;

    // Lower edge: largest x with bound(x) <= ln(p).
    let target_down = p.ln();
    let mut lo2 = mean_loss - sd;
    let mut grow = sd;
    while lower_log_bound(lo2)? > target_down {
        grow *= 2.0;
        lo2 = mean_loss - grow;
        if grow > 1e9 * sd {
            return Err(AdaisError::Solver {
                iteration: 0,
                message: "lower VaR bracket diverged".into(),
            });
        }
    }
    let mut hi2 = mean_loss;
    for _ in 0..200 {
        let mid = 0.5 * (lo2 + hi2);
        if lower_log_bound(mid)? <= target_down {
            lo2 = mid;
        } else {
            hi2 = mid;
        }
        if hi2 - lo2 <= 1e-9 * hi2.abs().max(1.0) {
            break;
        }
    }
    Interval::new(lo2, q_max)
}

/// Configuration for a VaR/CVaR estimation run.
#[derive(Debug, Clone)]
pub struct VarCvarConfig {
    pub p: f64,
    pub solver: SolverKind,
    /// `false` runs crude Monte Carlo through the same machinery.
    pub adaptive_is: bool,
    /// SA stepsize; defaults to `γ = 1/f̂(v_p)` with the loss density
    /// approximated by the Gaussian moments of Q.
    pub stepsize: Option<StepsizeSchedule>,
    /// SA projection set; defaults to the Chernoff VaR brackets.
    pub projection: Option<Interval>,
    /// SAA twist truncation; defaults to a fixed box wide enough to never
    /// bind inside the admissible domain.
    pub truncation: Option<TruncationSchedule>,
    pub theta0: Option<f64>,
    /// Fresh-batch size for the CVaR correction; defaults to the VaR budget.
    pub cvar_batch: Option<u64>,
    pub trace: TraceSpec,
}

impl VarCvarConfig {
    pub fn new(p: f64, solver: SolverKind, adaptive_is: bool) -> Self {
        Self {
            p,
            solver,
            adaptive_is,
            stepsize: None,
            projection: None,
            truncation: None,
            theta0: None,
            cvar_batch: None,
            trace: TraceSpec::final_only(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VarCvarEstimate {
    pub var: f64,
    pub cvar: f64,
    pub trace: RunTrace,
    /// Twist used for the CVaR batch.
    pub cvar_alpha: f64,
}

/// Estimate VaR by the chosen adaptive solver on the exactly repriced loss
/// quantile, then CVaR through
/// `c_p = v_p + E[(L - v_p)^+] / (1 - p)` with a fresh batch sharing the
/// final twist.
pub fn estimate_var_cvar(
    spec: &PortfolioSpec,
    cfg: &VarCvarConfig,
    n: u64,
    seed: RunSeed,
) -> Result<VarCvarEstimate> {
    if !(0.0 < cfg.p && cfg.p < 1.0) {
        return Err(AdaisError::Domain(format!("p must lie in (0,1), got {}", cfg.p)));
    }
    let family = PortfolioLossFamily::new(spec)?;
    estimate_var_cvar_with(&family, cfg, n, seed)
}

/// Same as [`estimate_var_cvar`] but reusing a prebuilt family (one model
/// build per experiment cell).
pub fn estimate_var_cvar_with(
    family: &PortfolioLossFamily,
    cfg: &VarCvarConfig,
    n: u64,
    seed: RunSeed,
) -> Result<VarCvarEstimate> {
    let model = &family.model;
    let projection = match cfg.projection {
        Some(p) => p,
        None => {
            let b = var_truncation_bounds(model, cfg.p)?;
            // Small symmetric slack so the true (exactly repriced) VaR
            // stays interior even where the quadratic form is off a little.
            let pad = 0.05 * (b.hi - b.lo);
            Interval::new(b.lo - pad, b.hi + pad)?
        }
    };
    let stepsize = match cfg.stepsize {
        Some(s) => s,
        None => {
            // Gaussian approximation of the loss density at the quantile.
            let sd = model.var_q().sqrt();
            let z = normal_quantile(cfg.p)?;
            let density = normal_pdf(z) / sd;
            let exponent = match cfg.solver {
                SolverKind::PrSa { .. } => 0.9,
                _ => 1.0,
            };
            StepsizeSchedule::new(1.0 / density, exponent)?
        }
    };
    let theta0 = cfg.theta0.unwrap_or_else(|| projection.midpoint());
    let problem: ScalarProblem<LossSample> = ScalarProblem::Quantile(QuantileProblem::new(
        |x: &LossSample| x.loss,
        cfg.p,
        Tail::Upper,
    )?);

    let truncation = match (&cfg.truncation, cfg.solver) {
        (Some(t), _) => Some(t.clone()),
        (None, SolverKind::Saa) => {
            // Wide fixed box; the selector output already lives inside the
            // admissible domain, so this almost never binds.
            let (lo, hi) = domain_inset(model);
            Some(TruncationSchedule::Fixed(crate::schedule::IntervalBox::scalar(
                lo.max(-5.0),
                hi.min(5.0),
            )?))
        }
        (None, _) => None,
    };

    let mut run_cfg = AdaptiveRunConfig {
        solver: cfg.solver,
        budget: n,
        seed,
        theta0,
        alpha1: None,
        truncation,
        stepsize: Some(stepsize),
        projection: Some(projection),
        refit_every: 1,
        trace: cfg.trace,
    };

    let trace;
    let v_p;
    let cvar_alpha;
    if cfg.adaptive_is {
        trace = run_adaptive(&problem, family, &run_cfg)?;
        v_p = trace.final_estimate;
        cvar_alpha = family.selector(v_p);
    } else {
        let crude = crate::family::CrudeIs { inner: family };
        run_cfg.alpha1 = Some(0.0);
        trace = run_adaptive(&problem, &crude, &run_cfg)?;
        v_p = trace.final_estimate;
        cvar_alpha = 0.0;
    }

    // CVaR correction batch under the final twist.
    let batch = cfg.cvar_batch.unwrap_or(n).max(1);
    let mut rng = RunSeed::new(seed.seed, stream_id(&[seed.stream, 0xc7a2])).rng();
    let mut acc = 0.0;
    for _ in 0..batch {
        let x = family.sample(cvar_alpha, &mut rng)?;
        let lr = family.log_likelihood_ratio(&x, cvar_alpha).exp();
        if !lr.is_finite() {
            return Err(AdaisError::NumericalOverflow {
                alpha: cvar_alpha,
                log_lr: f64::INFINITY,
            });
        }
        let excess = x.loss - v_p;
        if excess > 0.0 {
            acc += excess * lr;
        }
    }
    let c_p = v_p + acc / batch as f64 / (1.0 - cfg.p);
    Ok(VarCvarEstimate {
        var: v_p,
        cvar: c_p,
        trace,
        cvar_alpha,
    })
}

impl<'a> IsFamily for &'a PortfolioLossFamily {
    type Point = LossSample;

    fn base_param(&self) -> f64 {
        (**self).base_param()
    }
    fn param_space(&self) -> (f64, f64) {
        (**self).param_space()
    }
    fn selector(&self, theta: f64) -> f64 {
        (**self).selector(theta)
    }
    fn sample(&self, alpha: f64, rng: &mut RunRng) -> Result<LossSample> {
        (**self).sample(alpha, rng)
    }
    fn log_likelihood_ratio(&self, x: &LossSample, alpha: f64) -> f64 {
        (**self).log_likelihood_ratio(x, alpha)
    }
    fn point_value(&self, x: &LossSample) -> f64 {
        (**self).point_value(x)
    }
}
