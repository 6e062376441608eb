//! Privacy accountant for amplification by shuffling.
//!
//! Given `n` reports from an (ε₀, δ₀)-DP local randomizer passed through a
//! uniform shuffler, this crate computes upper and lower bounds on the central
//! (ε, δ)-DP and Rényi-DP guarantees:
//!
//! - [`closed_form`]: analytic bounds (closed-form ε, approximate-DP variant,
//!   k-ary randomized response, ε₀ selection, DP-SGD noise calibration).
//! - [`clones`]: the numerical amplification bound — exact hockey-stick
//!   divergence of the clone-reduction distribution pair, computed by a strided
//!   accumulator plus binary search over ε.
//! - [`rr_lower`]: exact divergence of shuffled binary randomized response,
//!   the lower-bound anchor, plus the deep-tail δ sweep.
//! - [`renyi`]: Rényi divergence of the clone pair, RDP composition and
//!   conversion to (ε, δ), and the advanced-composition baseline.
//! - [`dist`]: log-space binomial primitives shared by everything above.
//!
//! All computations are deterministic pure functions of their arguments.

pub mod cli;
pub mod clones;
pub mod closed_form;
pub mod dist;
pub mod renyi;
pub mod rr_lower;

/// Errors shared by every module.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the operation's domain (wrong range, NaN, ...).
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),
    /// The bound's applicability precondition fails; carries the admissible
    /// boundary of the violated parameter so callers can report or fall back.
    #[error("{message} (admissible boundary: {admissible})")]
    Applicability { message: String, admissible: f64 },
}

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::ParameterDomain(msg.into())
    }

    pub fn applicability(msg: impl Into<String>, admissible: f64) -> Self {
        Error::Applicability {
            message: msg.into(),
            admissible,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
