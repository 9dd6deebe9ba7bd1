//! Shared abstractions: vectors, feasible domains, component streams with
//! first-order-oracle accounting, and seeded randomness.

mod domain;
mod ledger;
mod rng;
mod stream;

pub use domain::Domain;
pub use ledger::FoLedger;
pub use rng::RngHandle;
pub use stream::{prefix_gradient, prefix_value, ComponentStream, Constants};

/// Dense column vector with `f64` entries. Dimension is fixed per problem
/// instance; all public constructors reject NaN or infinite coordinates.
pub type Vector = nalgebra::DVector<f64>;

/// True when every coordinate is finite (no NaN, no infinities).
pub fn is_finite(x: &Vector) -> bool {
    x.iter().all(|v| v.is_finite())
}
