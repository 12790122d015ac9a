//! Concrete tilt families for the three scalar benchmark distributions,
//! their closed-form tilt selectors, and the asymptotic variances the CLTs
//! predict for the adaptively tilted estimators.
//!
//! Selector derivations share one pattern: with the estimator
//! `1{Z >= q} ℓ(Z, α)` unbiased for the tail probability, minimizing its
//! variance over α is minimizing its second moment, and each family below
//! has that second moment in closed form.

use crate::error::{AdaisError, Result};
use crate::family::IsFamily;
use crate::math::{normal_pdf, normal_sf};
use crate::rng::RunRng;
use rand::Rng;
use rand_distr::{Exp, OpenClosed01, StandardNormal};

/// Mean-shift family over the standard normal: `P_α = N(α, 1)`.
///
/// `ln ℓ(z, α) = -α z + α²/2` exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct NormalShiftFamily;

impl IsFamily for NormalShiftFamily {
    type Point = f64;

    fn base_param(&self) -> f64 {
        0.0
    }

    fn param_space(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn selector(&self, theta: f64) -> f64 {
        normal_selector(theta)
    }

    fn sample(&self, alpha: f64, rng: &mut RunRng) -> Result<f64> {
        if !alpha.is_finite() {
            return Err(AdaisError::Domain(format!(
                "normal shift must be finite, got {alpha}"
            )));
        }
        let z: f64 = rng.sample(StandardNormal);
        Ok(z + alpha)
    }

    fn log_likelihood_ratio(&self, x: &f64, alpha: f64) -> f64 {
        -alpha * x + 0.5 * alpha * alpha
    }

    fn point_value(&self, x: &f64) -> f64 {
        *x
    }
}

/// Rate-tilt family over the exponential: base `Exp(λ)`, tilted `Exp(α)`.
///
/// Admissible tilts keep the likelihood-ratio second moment finite:
/// `α ∈ (0, 2λ)`.
#[derive(Debug, Clone, Copy)]
pub struct ExponentialTiltFamily {
    pub lambda: f64,
}

impl ExponentialTiltFamily {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(AdaisError::Config(format!(
                "exponential rate must be positive, got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }
}

impl IsFamily for ExponentialTiltFamily {
    type Point = f64;

    fn base_param(&self) -> f64 {
        self.lambda
    }

    fn param_space(&self) -> (f64, f64) {
        (0.0, 2.0 * self.lambda)
    }

    fn selector(&self, theta: f64) -> f64 {
        // Stable conjugate form of (λq + 1 - sqrt(1 + λ²q²)) / q; continuous
        // through q = 0 with limit λ (no tilt). Out-of-support q is left to
        // the truncation projection.
        let lq = self.lambda * theta.max(0.0);
        2.0 * self.lambda / (lq + 1.0 + (1.0 + lq * lq).sqrt())
    }

    fn sample(&self, alpha: f64, rng: &mut RunRng) -> Result<f64> {
        let (lo, hi) = self.param_space();
        if !(alpha > lo && alpha < hi) {
            return Err(AdaisError::Domain(format!(
                "exponential tilt {alpha} outside admissible ({lo}, {hi})"
            )));
        }
        let d = Exp::new(alpha).expect("validated rate");
        Ok(rng.sample(d))
    }

    fn log_likelihood_ratio(&self, x: &f64, alpha: f64) -> f64 {
        (self.lambda / alpha).ln() + (alpha - self.lambda) * x
    }

    fn point_value(&self, x: &f64) -> f64 {
        *x
    }
}

/// Tail-index tilt family over the Pareto law `P(Z > x) = x^{-λ}`, `x >= 1`.
///
/// Sampling is by inverse transform `X = U^{-1/α}` with `U ∈ (0, 1]`, which
/// is exact and branch-free on the support.
#[derive(Debug, Clone, Copy)]
pub struct ParetoTiltFamily {
    pub lambda: f64,
}

impl ParetoTiltFamily {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(AdaisError::Config(format!(
                "pareto tail index must be positive, got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }
}

impl IsFamily for ParetoTiltFamily {
    type Point = f64;

    fn base_param(&self) -> f64 {
        self.lambda
    }

    fn param_space(&self) -> (f64, f64) {
        (0.0, 2.0 * self.lambda)
    }

    fn selector(&self, theta: f64) -> f64 {
        let log_q = if theta > 1.0 { theta.ln() } else { 0.0 };
        let ll = self.lambda * log_q;
        2.0 * self.lambda / (ll + 1.0 + (1.0 + ll * ll).sqrt())
    }

    fn sample(&self, alpha: f64, rng: &mut RunRng) -> Result<f64> {
        let (lo, hi) = self.param_space();
        if !(alpha > lo && alpha < hi) {
            return Err(AdaisError::Domain(format!(
                "pareto tilt {alpha} outside admissible ({lo}, {hi})"
            )));
        }
        let u: f64 = rng.sample(OpenClosed01);
        Ok(u.powf(-1.0 / alpha))
    }

    fn log_likelihood_ratio(&self, x: &f64, alpha: f64) -> f64 {
        (self.lambda / alpha).ln() + (alpha - self.lambda) * x.ln()
    }

    fn point_value(&self, x: &f64) -> f64 {
        *x
    }
}

/// Tilt selector for the normal mean-shift family: center the sampler on
/// the level whose exceedance is being estimated.
pub fn normal_selector(q: f64) -> f64 {
    q
}

/// Tilt selector for the exponential family: the exact minimizer over
/// `α ∈ (0, 2λ)` of the closed-form second moment of `1{Z >= q} ℓ`.
pub fn exponential_selector(lambda: f64, q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(AdaisError::Domain(format!(
            "exponential selector needs q > 0, got {q}"
        )));
    }
    let lq = lambda * q;
    Ok(2.0 * lambda / (lq + 1.0 + (1.0 + lq * lq).sqrt()))
}

/// Tilt selector for the Pareto family; reduces to the exponential selector
/// in `ln q`.
pub fn pareto_selector(lambda: f64, q: f64) -> Result<f64> {
    if !(q > 1.0) {
        return Err(AdaisError::Domain(format!(
            "pareto selector needs q > 1, got {q}"
        )));
    }
    let ll = lambda * q.ln();
    Ok(2.0 * lambda / (ll + 1.0 + (1.0 + ll * ll).sqrt()))
}

/// `E_{Z~N(α,1)}[(1{Z >= q} ℓ(Z, α))²] = e^{α²} Φ̄(q + α)`.
pub fn normal_indicator_second_moment(q: f64, alpha: f64) -> f64 {
    (alpha * alpha).exp() * normal_sf(q + alpha)
}

/// Variance of the tail-probability estimator `1{Z >= q} ℓ(Z, α)` under
/// `P_α` for the normal shift family (closed form).
pub fn normal_is_variance(q: f64, alpha: f64) -> f64 {
    let tail = normal_sf(q);
    normal_indicator_second_moment(q, alpha) - tail * tail
}

/// Asymptotic variance of `sqrt(n)(q̂_n - q*)` for adaptively tilted SAA /
/// PR-SA on the upper-tail normal quantile; bounded by π for `q* >= 0`.
pub fn normal_asymptotic_variance(q_star: f64, p: f64) -> f64 {
    let m2 = normal_indicator_second_moment(q_star, q_star);
    let tail = 1.0 - p;
    let density = normal_pdf(q_star);
    (m2 - tail * tail) / (density * density)
}

/// `E_{Z~Exp(α)}[(1{Z >= q} ℓ(Z, α))²] = λ² e^{-2λq + αq} / (α(2λ - α))`.
pub fn exponential_second_moment(lambda: f64, q: f64, alpha: f64) -> f64 {
    lambda * lambda * (-2.0 * lambda * q + alpha * q).exp() / (alpha * (2.0 * lambda - alpha))
}

/// Asymptotic variance of the adaptively tilted upper-tail exponential
/// quantile estimator (SAA / PR-SA):
/// `q*² e^{λq* + 1 - s} / (2(s - 1)) - 1/λ²` with `s = sqrt(1 + λ²q*²)`.
pub fn exponential_asymptotic_variance(lambda: f64, q_star: f64) -> f64 {
    let s = (1.0 + lambda * lambda * q_star * q_star).sqrt();
    q_star * q_star * (lambda * q_star + 1.0 - s).exp() / (2.0 * (s - 1.0))
        - 1.0 / (lambda * lambda)
}

/// `E_{Z~Pareto(α)}[(1{Z >= q} ℓ(Z, α))²] = (λ²/α) q^{-2λ+α} / (2λ - α)`.
pub fn pareto_second_moment(lambda: f64, q: f64, alpha: f64) -> f64 {
    lambda * lambda / alpha * q.powf(-2.0 * lambda + alpha) / (2.0 * lambda - alpha)
}

/// Asymptotic variance of the adaptively tilted upper-tail Pareto quantile
/// estimator (SAA / PR-SA):
/// `q*² (q*^{I} / (I(2λ - I)) - 1/λ²)` with `I = I(q*)`.
pub fn pareto_asymptotic_variance(lambda: f64, q_star: f64) -> Result<f64> {
    let tilt = pareto_selector(lambda, q_star)?;
    Ok(q_star * q_star
        * (q_star.powf(tilt) / (tilt * (2.0 * lambda - tilt)) - 1.0 / (lambda * lambda)))
}

/// RM-SA variant of a CLT constant: `γ² v / (2γ f' - 1)`, valid when
/// `2γ f'(θ*) > 1`.
pub fn rm_sa_asymptotic_variance(gamma: f64, estimator_variance: f64, fprime: f64) -> Result<f64> {
    let denom = 2.0 * gamma * fprime - 1.0;
    if denom <= 0.0 {
        return Err(AdaisError::Domain(format!(
            "RM-SA CLT needs 2γf' > 1, got 2*{gamma}*{fprime} = {}",
            2.0 * gamma * fprime
        )));
    }
    Ok(gamma * gamma * estimator_variance / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::normal_quantile;
    use crate::rng::RunSeed;

    #[test]
    fn normal_selector_is_identity() {
        assert_eq!(normal_selector(2.0), 2.0);
        assert_eq!(normal_selector(0.0), 0.0);
        assert_eq!(normal_selector(-1.5), -1.5);
    }

    #[test]
    fn exponential_selector_closed_values() {
        // λ=2, q=1: (λq + 1 - sqrt(1 + λ²q²))/q = 3 - sqrt(5).
        let got = exponential_selector(2.0, 1.0).unwrap();
        assert!((got - (3.0 - 5f64.sqrt())).abs() < 1e-14);
        // λ=2, q=10: (21 - sqrt(401))/10.
        let got = exponential_selector(2.0, 10.0).unwrap();
        assert!((got - (21.0 - 401f64.sqrt()) / 10.0).abs() < 1e-14);
        // Limit q -> 0+ is λ.
        let got = exponential_selector(1.0, 1e-14).unwrap();
        assert!((got - 1.0).abs() < 1e-12);
        assert!(exponential_selector(2.0, 0.0).is_err());
        assert!(exponential_selector(2.0, -1.0).is_err());
    }

    #[test]
    fn pareto_selector_matches_exponential_in_log_q() {
        let got = pareto_selector(2.0, std::f64::consts::E).unwrap();
        assert!((got - (3.0 - 5f64.sqrt())).abs() < 1e-14);
        let got = pareto_selector(2.0, (10.0f64).exp()).unwrap();
        assert!((got - (21.0 - 401f64.sqrt()) / 10.0).abs() < 1e-12);
        // q -> 1+ limit is λ.
        let got = pareto_selector(1.0, 1.0 + 1e-13).unwrap();
        assert!((got - 1.0).abs() < 1e-10);
        assert!(pareto_selector(2.0, 1.0).is_err());
    }

    #[test]
    fn selectors_interior_and_monotone() {
        for family_lambda in [0.5, 1.0, 2.0] {
            let mut last = f64::INFINITY;
            for k in 0..60 {
                let q = 0.05 * (k + 1) as f64;
                let a = exponential_selector(family_lambda, q).unwrap();
                assert!(a > 0.0 && a < family_lambda);
                assert!(a <= last + 1e-15, "not nonincreasing at q={q}");
                last = a;
            }
        }
    }

    #[test]
    fn normal_asymptotic_variance_at_median() {
        // q*=0, p=0.5: (Φ̄(0) - 0.25)/φ(0)² = 0.25 · 2π.
        let v = normal_asymptotic_variance(0.0, 0.5);
        assert!((v - 0.5 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn normal_asymptotic_variance_bounded_by_pi() {
        for k in 0..=80 {
            let q = 0.1 * k as f64;
            let p = 1.0 - normal_sf(q);
            let v = normal_asymptotic_variance(q, p);
            assert!(v > 0.0 && v <= std::f64::consts::PI + 1e-9, "q={q}: v={v}");
        }
    }

    #[test]
    fn exponential_asymptotic_variance_identity_route() {
        // The display formula equals (m2 - p̄²)/f(q*)² with p̄ = e^{-λq*}.
        let (lambda, p) = (2.0, 0.999);
        let q_star = -(1.0 - p as f64).ln() / lambda;
        let alpha = exponential_selector(lambda, q_star).unwrap();
        let m2 = exponential_second_moment(lambda, q_star, alpha);
        let pbar = (-lambda * q_star).exp();
        let f = lambda * (-lambda * q_star).exp();
        let via_moments = (m2 - pbar * pbar) / (f * f);
        let display = exponential_asymptotic_variance(lambda, q_star);
        assert!((via_moments - display).abs() < 1e-9 * display.abs());
    }

    #[test]
    fn pareto_asymptotic_variance_identity_route() {
        let (lambda, p): (f64, f64) = (2.0, 0.999);
        let q_star = (1.0 - p).powf(-1.0 / lambda);
        let alpha = pareto_selector(lambda, q_star).unwrap();
        let m2 = pareto_second_moment(lambda, q_star, alpha);
        let pbar = q_star.powf(-lambda);
        let f = lambda * q_star.powf(-lambda - 1.0);
        let via_moments = (m2 - pbar * pbar) / (f * f);
        let display = pareto_asymptotic_variance(lambda, q_star).unwrap();
        assert!((via_moments - display).abs() < 1e-9 * display.abs());
    }

    #[test]
    fn base_measure_log_lr_is_zero() {
        let mut rng = RunSeed::new(3, 0).rng();
        let nf = NormalShiftFamily;
        let ef = ExponentialTiltFamily::new(2.0).unwrap();
        let pf = ParetoTiltFamily::new(2.0).unwrap();
        for _ in 0..50 {
            let z = nf.sample(nf.base_param(), &mut rng).unwrap();
            assert_eq!(nf.log_likelihood_ratio(&z, nf.base_param()), 0.0);
            let x = ef.sample(ef.base_param(), &mut rng).unwrap();
            assert_eq!(ef.log_likelihood_ratio(&x, ef.base_param()), 0.0);
            let y = pf.sample(pf.base_param(), &mut rng).unwrap();
            assert_eq!(pf.log_likelihood_ratio(&y, pf.base_param()), 0.0);
        }
    }

    #[test]
    fn tilt_sampling_rejects_inadmissible() {
        let mut rng = RunSeed::new(3, 1).rng();
        let ef = ExponentialTiltFamily::new(2.0).unwrap();
        assert!(ef.sample(0.0, &mut rng).is_err());
        assert!(ef.sample(4.0, &mut rng).is_err());
        let pf = ParetoTiltFamily::new(2.0).unwrap();
        assert!(pf.sample(-0.5, &mut rng).is_err());
        assert!(pf.sample(4.5, &mut rng).is_err());
    }

    #[test]
    fn rm_sa_variance_variant() {
        // With the optimal gain γ = 1/f', the RM-SA constant equals v/f'².
        let v = 0.7;
        let fp = 0.2;
        let rm = rm_sa_asymptotic_variance(1.0 / fp, v, fp).unwrap();
        assert!((rm - v / (fp * fp)).abs() < 1e-12);
        assert!(rm_sa_asymptotic_variance(1.0, v, 0.2).is_err());
    }

    #[test]
    fn normal_asymptotic_variance_near_table_scale() {
        // At p = 0.999 the n-scaled variance should be ~0.307, i.e. about
        // 2.4e-6 at n = 128000 — the magnitude reported for SAA-IS.
        let q = normal_quantile(0.999).unwrap();
        let v = normal_asymptotic_variance(q, 0.999);
        assert!((v - 0.3066).abs() < 5e-3, "v={v}");
    }
}
