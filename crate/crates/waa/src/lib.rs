//! Online prediction with expert advice over pools of stationary strategies.
//!
//! The aggregator is the Weak Aggregating Algorithm (WAA) of Kalnishkan and
//! Vyugin: exponential weighting with the time-decaying learning rate
//! `beta_n = exp(-1/sqrt(n))`, which guarantees average regret `O(1/sqrt(N))`
//! against every expert in the pool without knowing a loss bound in advance.
//! On top of the plain aggregator this crate provides
//!
//! - enumerable families of stationary strategies (constant, linear with
//!   bounded memory, nearest-centroid) standing in for a dense strategy
//!   sequence, with exact retroactive replay ([`experts`]);
//! - randomized (measure-valued) prediction with finite-support measures,
//!   expected loss, seeded inverse-CDF sampling, and law-of-the-iterated-
//!   logarithm monitors ([`randomized`]);
//! - the removal-game meta-strategy for unbounded domains: a doubling compact
//!   exhaustion, loss-dominating clipping of strategies into compacts, and
//!   restart bookkeeping ([`removal`]);
//! - a harness: seeded environments, JSON run configs, CSV traces, and a
//!   verification battery that re-checks every aggregator inequality at
//!   runtime ([`runner`]).
//!
//! Every guarantee the aggregator relies on (the per-round weight-update
//! inequality, the regret bound, the generalized-mean comparison, countable
//! convexity, clip dominance) is exposed as a checkable operation rather than
//! trusted, so a run can certify its own transcript.

pub mod config;
pub mod domain;
pub mod engine;
pub mod environment;
pub mod experts;
pub mod loss;
pub mod randomized;
pub mod removal;
pub mod runner;
pub mod trace;

pub use config::{EnvironmentSpec, Mode, RunConfig};
pub use domain::{CompactBall, History, Norm, Point, Transcript};
pub use engine::{ExpertPool, RoundReport, RoundStart, WaaState};
pub use experts::{EnumConfig, Family, FamilyConfig, Predictor, StationaryStrategy};
pub use loss::{LossFunction, LossOn};
pub use randomized::{DiscreteMeasure, LilMonitor};
pub use removal::{ClippingSpec, MetaPredictor, RemovalState};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("config: {0}")]
    Config(String),
    #[error("trace: {0}")]
    Trace(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shared tolerance for inequality checks: absolute plus relative `1e-9`.
///
/// The aggregator's inequalities are exact over the reals; this slack only
/// absorbs double rounding across long accumulations.
pub const CHECK_TOL: f64 = 1e-9;

/// Returns true when `lhs <= rhs` up to the crate-wide check tolerance.
pub fn leq_with_tol(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + CHECK_TOL * rhs.abs().max(1.0)
}
