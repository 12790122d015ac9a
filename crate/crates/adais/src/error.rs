//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdaisError {
    /// Malformed configuration (empty boxes, lo > hi, bad probability levels, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Caller violated a precondition (n = 0 stepsize, empty sample set, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The cumulative normalized weight never reaches the requested level.
    #[error("quantile level {level} unreachable: normalized weight total {normalized_total} over {n} samples")]
    LevelUnreachable {
        level: f64,
        normalized_total: f64,
        n: usize,
    },

    /// Root bracketing failed: no sign change on the candidate interval.
    #[error("no sign change on bracket [{lo}, {hi}] (g(lo)={g_lo}, g(hi)={g_hi})")]
    Bracket {
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },

    /// An inner solver failed; carries the outer iteration index.
    #[error("solver failure at iteration {iteration}: {message}")]
    Solver { iteration: u64, message: String },

    /// A likelihood ratio overflowed or was otherwise non-finite.
    #[error("non-finite likelihood ratio at alpha = {alpha}: log lr = {log_lr}")]
    NumericalOverflow { alpha: f64, log_lr: f64 },

    /// Matrix decomposition failed (non-PSD covariance, singular Jacobian, ...).
    #[error("decomposition error: {0}")]
    Decomposition(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, AdaisError>;
