//! Reward learning from pairwise and ranking preference feedback over a
//! finite set of arms, together with the policies induced by the learned
//! rewards and numerical checks of the underlying dynamics.
//!
//! The crate centers on a small cast:
//!
//! * [`model`] defines the comparison model (sigmoid preferences over reward
//!   differences) and the distributions comparisons are drawn from;
//! * [`data`] samples and serializes preference datasets;
//! * [`train`] fits reward vectors by gradient descent, with optional label
//!   smoothing that guards rarely compared arms against overfitting;
//! * [`pessimism`] post-processes estimates with coverage-based penalties;
//! * [`policy`] turns estimates into exponentially tilted policies and
//!   measures what they actually earn under the true rewards;
//! * [`dynamics`] integrates the two-timescale limit of smoothed training
//!   and compares it against the discrete runs;
//! * [`harness`] wires these into reproducible experiments and Monte Carlo
//!   verification runs.
//!
//! Everything is deterministic given a seed; see [`rng`].

pub mod data;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod multiwise;
pub mod pessimism;
pub mod policy;
pub mod registry;
pub mod rng;
pub mod stationary;
pub mod train;

pub use error::{Error, Result};
