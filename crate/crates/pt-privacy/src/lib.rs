//! Solver library for a two-stage privacy-preserving data collection game.
//!
//! A data collector publishes an epsilon-differentially-private mechanism;
//! individuals with prospect-theoretic preferences (loss aversion `lambda`,
//! risk curvature `beta`, reference privacy level `eps_ref`) decide whether
//! to contribute data. The collector picks the privacy level that maximizes
//! her benefit from participation minus the Laplace-noise accuracy penalty.
//!
//! Modules follow the two stages plus the machinery around them:
//!
//! - [`pt`]: prospect-theoretic valuation of privacy levels,
//! - [`population`]: reward-valuation distributions, participation rule,
//!   heterogeneous rosters and Gamma parameter utilities,
//! - [`collector`]: the collector's benefit, accuracy penalty, utility,
//!   derivative and the approximated root polynomials,
//! - [`solver`]: closed-form, bracketed-root and exhaustive-search optima,
//! - [`experiments`]: scripted parameter sweeps with machine-checkable
//!   assertions and CSV/JSON-friendly records.

pub mod collector;
pub mod experiments;
pub mod numeric;
pub mod population;
pub mod pt;
pub mod solver;

mod error;

pub use error::{Error, Result};
