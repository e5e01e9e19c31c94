//! Crate-wide error type.
//!
//! One enum covers every failure mode of the numerical layers. Variants
//! carry enough context to diagnose a failed run from the message alone,
//! since the CLI maps them straight to exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Input outside a function's mathematical domain (Gamma pole,
    /// mapping argument out of range, zero field where a ratio is needed).
    #[error("domain error in {context}: {message}")]
    Domain {
        context: &'static str,
        message: String,
    },

    /// An iterative evaluation stopped before reaching its tolerance.
    /// Carries the last estimate so callers can judge how bad it is.
    #[error("{name} failed to converge after {steps} steps (last estimate {estimate:e})")]
    Accuracy {
        name: &'static str,
        estimate: f64,
        steps: usize,
    },

    /// Mathematically meaningful configuration that this implementation
    /// does not cover (for example a mapping order outside {0, 1}).
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// An index set or linear system would exceed the configured budget.
    #[error("capacity exceeded: {needed} basis functions requested, budget is {budget}")]
    Capacity { needed: usize, budget: usize },

    /// Newton iteration inside the time stepper did not converge.
    #[error("nonlinear solve failed at t = {t}: residual {residual:e} after {iters} iterations")]
    SolveFailed { t: f64, residual: f64, iters: usize },

    /// A sampler produced NaN or infinity at a quadrature node.
    #[error("non-finite sample at grid node {coords:?}")]
    NonFiniteSample { coords: Vec<f64> },

    /// Underlying I/O failure (snapshots, operator cache).
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed on-disk data (snapshot or cache file).
    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, CoreError>;
