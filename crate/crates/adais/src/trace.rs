//! Per-run records.

/// What a run keeps beyond its final estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceSpec {
    /// Record the iterate and tilt-parameter paths.
    pub keep_path: bool,
    /// Record `(sample value, log likelihood ratio)` pairs. `None` picks the
    /// solver default: retained for SAA (which owns the samples anyway),
    /// discarded for SA.
    pub keep_samples: Option<bool>,
}

impl Default for TraceSpec {
    fn default() -> Self {
        Self {
            keep_path: true,
            keep_samples: None,
        }
    }
}

impl TraceSpec {
    pub fn final_only() -> Self {
        Self {
            keep_path: false,
            keep_samples: Some(false),
        }
    }
}

/// Counters for the benign degeneracies a run may hit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraceFlags {
    /// Iterations where the cumulative weight could not reach the level and
    /// the estimate fell back to the extreme retained value.
    pub level_unreachable: u64,
    /// Likelihood ratios that underflowed to exactly zero (kept as valid
    /// zero weights).
    pub zero_likelihood_ratio: u64,
    /// Tilt selector saturated at its domain boundary.
    pub selector_saturated: u64,
    /// Inner solver had to fall back (bracket rescue, relaxation, ...).
    pub solver_fallback: u64,
}

/// Record of one adaptive run.
///
/// `iterates[k]`, `is_params[k]`, `samples[k]` describe iteration `k + 1`:
/// the tilt that generated sample `k + 1` and the estimate after absorbing
/// it. All three are empty unless requested via [`TraceSpec`]; lengths agree
/// whenever recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub n: u64,
    /// `θ̂_N`, or the averaged `θ̄_N` for PR-SA.
    pub final_estimate: f64,
    pub iterates: Vec<f64>,
    pub is_params: Vec<f64>,
    /// `(scalar sample value, log likelihood ratio)`.
    pub samples: Vec<(f64, f64)>,
    pub flags: TraceFlags,
}

impl RunTrace {
    pub(crate) fn new(n: u64, spec: TraceSpec, samples_default: bool) -> (Self, bool, bool) {
        let keep_path = spec.keep_path;
        let keep_samples = spec.keep_samples.unwrap_or(samples_default);
        let cap_path = if keep_path { n as usize } else { 0 };
        let cap_samples = if keep_samples { n as usize } else { 0 };
        (
            Self {
                n: 0,
                final_estimate: f64::NAN,
                iterates: Vec::with_capacity(cap_path),
                is_params: Vec::with_capacity(cap_path),
                samples: Vec::with_capacity(cap_samples),
                flags: TraceFlags::default(),
            },
            keep_path,
            keep_samples,
        )
    }

    /// Bit-level equality, including negative zeros; two runs of the same
    /// seeded configuration must satisfy this.
    pub fn bit_identical(&self, other: &RunTrace) -> bool {
        fn bits(x: f64) -> u64 {
            x.to_bits()
        }
        self.n == other.n
            && bits(self.final_estimate) == bits(other.final_estimate)
            && self.flags == other.flags
            && self.iterates.len() == other.iterates.len()
            && self
                .iterates
                .iter()
                .zip(&other.iterates)
                .all(|(a, b)| bits(*a) == bits(*b))
            && self.is_params.len() == other.is_params.len()
            && self
                .is_params
                .iter()
                .zip(&other.is_params)
                .all(|(a, b)| bits(*a) == bits(*b))
            && self.samples.len() == other.samples.len()
            && self
                .samples
                .iter()
                .zip(&other.samples)
                .all(|(a, b)| bits(a.0) == bits(b.0) && bits(a.1) == bits(b.1))
    }

    /// Every recorded likelihood ratio is strictly positive and finite.
    /// Underflowed ratios (log ratio `-inf`, weight exactly zero) are
    /// tolerated only when the zero counter accounts for them.
    pub fn likelihood_ratios_valid(&self) -> bool {
        let zeros = self
            .samples
            .iter()
            .filter(|(_, log_lr)| *log_lr == f64::NEG_INFINITY)
            .count() as u64;
        self.samples
            .iter()
            .all(|(_, log_lr)| log_lr.is_finite() || *log_lr == f64::NEG_INFINITY)
            && zeros <= self.flags.zero_likelihood_ratio
    }
}
