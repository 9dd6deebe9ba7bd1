//! Problem families with analytic ground truth.
//!
//! Each family implements [`ComponentStream`](crate::core::ComponentStream)
//! and additionally exposes exact per-stage optima, so optimality gaps can be
//! measured against closed forms rather than against another iterative
//! solver:
//!
//! - [`QuadraticStream`]: components `scale * ||x - c_j||^2`; the stage-`i`
//!   optimum is the running mean of the first `i` centers.
//! - [`RidgeStream`]: ridge regression rows; stage optima solve the
//!   regularized normal equations, maintained incrementally.
//! - [`AdversarialInstance`]: the two-dimensional stream realizing the
//!   lower-bound construction, with a closed-form gap for any output whose
//!   second coordinate is zero.

mod adversarial;
mod libsvm;
mod quadratic;
mod ridge;

pub use adversarial::{adversarial_gap, AdversarialInstance};
pub use libsvm::{parse_libsvm, parse_libsvm_reader, write_libsvm};
pub use quadratic::{drift_bound_check, QuadraticStream};
pub use ridge::{estimate_constants, standardize_features, RidgeExact, RidgeStream, SyntheticRidge};
