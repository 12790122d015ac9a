//! Projection boxes, truncation schedules, and stepsize schedules.

use crate::error::{AdaisError, Result};
use serde::{Deserialize, Serialize};

/// Closed scalar interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(AdaisError::Config(format!(
                "malformed interval [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Axis-aligned box in `R^k` with finite bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl IntervalBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(AdaisError::Config(format!(
                "box bounds must be nonempty and of equal length ({} vs {})",
                lo.len(),
                hi.len()
            )));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l.is_finite() && h.is_finite()) || l > h {
                return Err(AdaisError::Config(format!("malformed box side [{l}, {h}]")));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn scalar(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Componentwise clamp in place.
    pub fn project_in_place(&self, v: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim());
        for (x, (l, h)) in v.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *x = x.clamp(*l, *h);
        }
    }

    pub fn project_scalar(&self, x: f64) -> f64 {
        debug_assert_eq!(self.dim(), 1);
        x.clamp(self.lo[0], self.hi[0])
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    /// `other` fits inside `self` componentwise.
    pub fn contains_box(&self, other: &IntervalBox) -> bool {
        self.dim() == other.dim()
            && self
                .lo
                .iter()
                .zip(&other.lo)
                .all(|(outer, inner)| outer <= inner)
            && self
                .hi
                .iter()
                .zip(&other.hi)
                .all(|(outer, inner)| outer >= inner)
    }
}

/// Componentwise projection of `v` onto `box_`.
pub fn project_box(v: &[f64], box_: &IntervalBox) -> Result<Vec<f64>> {
    if v.len() != box_.dim() {
        return Err(AdaisError::Config(format!(
            "projection dimension mismatch: point {} vs box {}",
            v.len(),
            box_.dim()
        )));
    }
    let mut out = v.to_vec();
    box_.project_in_place(&mut out);
    Ok(out)
}

/// Stepsize schedule `γ_n = γ / n^a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepsizeSchedule {
    pub gamma: f64,
    pub exponent: f64,
}

impl StepsizeSchedule {
    pub fn new(gamma: f64, exponent: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(AdaisError::Config(format!(
                "stepsize constant must be positive, got {gamma}"
            )));
        }
        if !(exponent > 0.5 && exponent <= 1.0) {
            return Err(AdaisError::Config(format!(
                "stepsize exponent must lie in (1/2, 1], got {exponent}"
            )));
        }
        Ok(Self { gamma, exponent })
    }

    /// `γ / n^a` for `n >= 1`.
    pub fn step(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(AdaisError::Usage("stepsize index starts at 1".into()));
        }
        Ok(self.gamma / (n as f64).powf(self.exponent))
    }
}

/// Nested truncation sets `A_1 ⊆ A_2 ⊆ ...` for the IS parameter.
///
/// The growth caps the second moment of the likelihood ratio: the box at
/// iteration n must keep `E[(F ℓ)^2] = O(n^{1-ε})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TruncationSchedule {
    /// Same box at every iteration.
    Fixed(IntervalBox),
    /// Symmetric box `[-r_n, r_n]` with `r_n = sqrt(ln(a n^{1-eps}))`,
    /// suited to mean-shift families where `exp(α^2)` drives the moment.
    LogGrowth { a: f64, eps: f64 },
    /// One-sided shrink toward zero: `[max(floor, c n^{-(1-eps)}), hi]`,
    /// suited to rate-tilt families where `1/α` drives the moment.
    RateTilt { c: f64, eps: f64, floor: f64, hi: f64 },
}

impl TruncationSchedule {
    /// Box at iteration `n >= 1`.
    pub fn set_at(&self, n: u64) -> IntervalBox {
        let n = n.max(1) as f64;
        match self {
            TruncationSchedule::Fixed(b) => b.clone(),
            TruncationSchedule::LogGrowth { a, eps } => {
                let r = (a * n.powf(1.0 - eps)).max(1.0).ln().sqrt();
                IntervalBox {
                    lo: vec![-r],
                    hi: vec![r],
                }
            }
            TruncationSchedule::RateTilt { c, eps, floor, hi } => {
                let lo = (c * n.powf(-(1.0 - eps))).max(*floor).min(*hi);
                IntervalBox {
                    lo: vec![lo],
                    hi: vec![*hi],
                }
            }
        }
    }
}
