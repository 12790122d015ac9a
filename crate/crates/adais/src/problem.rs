//! Scalar root-finding and quantile problem descriptions.

use crate::error::{AdaisError, Result};
use std::sync::Arc;

/// Which tail of `h(X)` the quantile lives in.
///
/// The solvers natively track the upper tail with outputs
/// `1{h(X) >= q} ℓ` against level `1 - p`; the lower tail is obtained by
/// negating `h`, not by a second code path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    Lower,
    Upper,
}

/// Find `θ` with `E_P[F(X, θ)] = c` for a scalar `θ`.
///
/// `evaluate` must be deterministic in `(x, θ)`.
#[derive(Clone)]
pub struct ScalarRootProblem<X> {
    pub evaluate: Arc<dyn Fn(&X, f64) -> f64 + Send + Sync>,
    pub target: f64,
}

impl<X> ScalarRootProblem<X> {
    pub fn new(evaluate: impl Fn(&X, f64) -> f64 + Send + Sync + 'static, target: f64) -> Self {
        Self {
            evaluate: Arc::new(evaluate),
            target,
        }
    }
}

/// Find the `p`-quantile of `h(X)`.
#[derive(Clone)]
pub struct QuantileProblem<X> {
    pub h: Arc<dyn Fn(&X) -> f64 + Send + Sync>,
    pub p: f64,
    pub tail: Tail,
}

impl<X> QuantileProblem<X> {
    pub fn new(
        h: impl Fn(&X) -> f64 + Send + Sync + 'static,
        p: f64,
        tail: Tail,
    ) -> Result<Self> {
        if !(0.0 < p && p < 1.0) {
            return Err(AdaisError::Config(format!(
                "quantile level must lie in (0,1), got {p}"
            )));
        }
        Ok(Self {
            h: Arc::new(h),
            p,
            tail,
        })
    }

    /// Tail probability driving the native upper-tail recursion:
    /// `1 - p` in upper-tail mode, `p` after negation in lower-tail mode.
    pub fn tail_prob(&self) -> f64 {
        match self.tail {
            Tail::Upper => 1.0 - self.p,
            Tail::Lower => self.p,
        }
    }
}

/// What an adaptive solver is pointed at.
#[derive(Clone)]
pub enum ScalarProblem<X> {
    Root(ScalarRootProblem<X>),
    Quantile(QuantileProblem<X>),
}
