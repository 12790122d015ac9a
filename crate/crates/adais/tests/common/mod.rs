//! Shared oracles for the integration suites. Everything here is written
//! independently of the library's implementation paths: numeric
//! minimization instead of closed-form selectors, quadrature instead of
//! erfc, O(n²) enumeration instead of the order-statistic tree.

#![allow(dead_code)]

use adais::math::golden_section_min;

/// Numeric argmin of a smooth unimodal function: golden section brackets
/// the minimum, then bisection on the central-difference slope refines it
/// past the sqrt(eps) function-comparison plateau.
pub fn numeric_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let rough = golden_section_min(&f, lo, hi, 1e-6);
    let h = 1e-6;
    let slope = |a: f64| (f(a + h) - f(a - h)) / (2.0 * h);
    let (mut a, mut b) = ((rough - 1e-4).max(lo + h), (rough + 1e-4).min(hi - h));
    if slope(a) > 0.0 || slope(b) < 0.0 {
        return rough;
    }
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if slope(mid) > 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    0.5 * (a + b)
}

/// O(n²) enumeration of `inf { q : (1/n) Σ 1{v_i <= q} w_i >= p }`:
/// every sample value is a candidate, each checked by a fresh pass.
pub fn brute_force_weighted_quantile(values: &[f64], weights: &[f64], p: f64) -> Option<f64> {
    let n = values.len() as f64;
    let mut best: Option<f64> = None;
    for &cand in values {
        let mass: f64 = values
            .iter()
            .zip(weights)
            .filter(|(v, _)| **v <= cand)
            .map(|(_, w)| *w)
            .sum();
        if mass >= p * n && best.map_or(true, |b| cand < b) {
            best = Some(cand);
        }
    }
    best
}

/// Reference standard normal CDF by composite Simpson quadrature of the
/// density (independent of erfc).
pub fn simpson_normal_cdf(x: f64) -> f64 {
    if x < -12.0 {
        return 0.0;
    }
    if x > 12.0 {
        return 1.0;
    }
    let lo = -12.0f64;
    let n = 40_000usize; // even
    let h = (x - lo) / n as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = pdf(lo) + pdf(x);
    for k in 1..n {
        let t = lo + h * k as f64;
        acc += pdf(t) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Independent textbook Black–Scholes evaluator on top of the quadrature
/// CDF; returns (price, delta, gamma, theta) for a call or put.
pub fn reference_black_scholes(
    s: f64,
    k: f64,
    r: f64,
    sigma: f64,
    tau: f64,
    call: bool,
) -> (f64, f64, f64, f64) {
    let sq = tau.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * tau) / (sigma * sq);
    let d2 = d1 - sigma * sq;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let nd1 = simpson_normal_cdf(d1);
    let nd2 = simpson_normal_cdf(d2);
    let disc = k * (-r * tau).exp();
    if call {
        (
            s * nd1 - disc * nd2,
            nd1,
            pdf(d1) / (s * sigma * sq),
            -s * pdf(d1) * sigma / (2.0 * sq) - r * disc * nd2,
        )
    } else {
        (
            disc * (1.0 - nd2) - s * (1.0 - nd1),
            nd1 - 1.0,
            pdf(d1) / (s * sigma * sq),
            -s * pdf(d1) * sigma / (2.0 * sq) + r * disc * (1.0 - nd2),
        )
    }
}

/// Mean and standard error of an iterator of samples.
pub fn mc_mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
