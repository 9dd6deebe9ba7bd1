//! Continual finite-sum minimization toolkit.
//!
//! A stream of strongly convex components `f_1, ..., f_n` arrives one per
//! stage, and at every stage `i` we want a point `x̂_i` that is near-optimal
//! for the running average `g_i(x) = (1/i) Σ_{j≤i} f_j(x)` over a feasible
//! set. Cost is measured in first-order oracles (FOs): one FO is one
//! evaluation of a single component gradient `∇f_j(x)`.
//!
//! The crate provides:
//!
//! - [`csvrg`]: the continual stochastic variance-reduced gradient method
//!   (CSVRG). It maintains an aggregate direction that tracks the full prefix
//!   gradient at a sparsely refreshed anchor point and spends 3 FOs per inner
//!   step, independent of the stage index.
//! - [`baselines`]: per-stage SGD, a sparse SGD variant that skips stages,
//!   and per-stage SVRG / Katyusha run on the prefix objective.
//! - [`problems`]: problem families with analytic ground truth (ridge
//!   regression over LIBSVM or synthetic data, quadratic streams, and a
//!   two-dimensional instance realizing the lower-bound construction).
//! - [`verify`]: brute-force oracles that check the algorithmic identities
//!   (estimator unbiasedness, aggregate correctness, recompute sparsity,
//!   optimum drift, estimator variance, lower-bound gap) by enumeration.
//! - [`harness`]: TOML-configured multi-seed experiments with CSV output.
//!
//! Everything is deterministic given a seed; see [`core::RngHandle`] for the
//! splitting rule that derives per-stage randomness.

pub mod baselines;
pub mod core;
pub mod csvrg;
pub mod error;
pub mod harness;
pub mod problems;
pub mod verify;

pub use crate::core::{
    prefix_gradient, prefix_value, ComponentStream, Constants, Domain, FoLedger, RngHandle, Vector,
};
pub use crate::error::{Error, Result};
