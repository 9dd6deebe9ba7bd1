use super::{is_finite, Vector};
use crate::error::{Error, Result};

/// Feasible set with Euclidean projection.
///
/// Three shapes cover everything the solvers need: axis-aligned boxes, balls,
/// and the unconstrained case (projection is the identity, diameter is
/// infinite). `diameter` returns the exact maximum pairwise distance of the
/// set, which step-size and skip-threshold schedules consume.
#[derive(Clone, Debug)]
pub enum Domain {
    Box { lower: Vector, upper: Vector },
    Ball { center: Vector, radius: f64 },
    Unconstrained,
}

impl Domain {
    /// Axis-aligned box with per-coordinate bounds.
    pub fn bounds(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::invalid_input(format!(
                "box bounds have mismatched dimensions {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if !is_finite(&lower) || !is_finite(&upper) {
            return Err(Error::invalid_input("box bounds must be finite"));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(Error::invalid_input("box has lower > upper in some coordinate"));
        }
        Ok(Domain::Box { lower, upper })
    }

    /// The box `[-half_width, half_width]^d`.
    pub fn symmetric_box(d: usize, half_width: f64) -> Result<Self> {
        if !(half_width.is_finite() && half_width >= 0.0) {
            return Err(Error::invalid_input("box half-width must be finite and nonnegative"));
        }
        Self::bounds(
            Vector::from_element(d, -half_width),
            Vector::from_element(d, half_width),
        )
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        if !is_finite(&center) || !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::invalid_input("ball needs finite center and nonnegative radius"));
        }
        Ok(Domain::Ball { center, radius })
    }

    /// Maximum pairwise distance of the set; `+inf` when unconstrained.
    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Box { lower, upper } => (upper - lower).norm(),
            Domain::Ball { radius, .. } => 2.0 * radius,
            Domain::Unconstrained => f64::INFINITY,
        }
    }

    /// Euclidean projection onto the set.
    ///
    /// Boxes clamp per coordinate; balls scale radially toward the center;
    /// the unconstrained domain returns `x` unchanged.
    pub fn project(&self, x: &Vector) -> Result<Vector> {
        if !is_finite(x) {
            return Err(Error::invalid_input("cannot project a non-finite point"));
        }
        match self {
            Domain::Box { lower, upper } => {
                if x.len() != lower.len() {
                    return Err(Error::invalid_input(format!(
                        "point dimension {} does not match domain dimension {}",
                        x.len(),
                        lower.len()
                    )));
                }
                Ok(Vector::from_iterator(
                    x.len(),
                    x.iter()
                        .zip(lower.iter().zip(upper.iter()))
                        .map(|(&v, (&l, &u))| v.clamp(l, u)),
                ))
            }
            Domain::Ball { center, radius } => {
                if x.len() != center.len() {
                    return Err(Error::invalid_input(format!(
                        "point dimension {} does not match domain dimension {}",
                        x.len(),
                        center.len()
                    )));
                }
                let offset = x - center;
                let dist = offset.norm();
                if dist <= *radius {
                    Ok(x.clone())
                } else {
                    Ok(center + offset * (*radius / dist))
                }
            }
            Domain::Unconstrained => Ok(x.clone()),
        }
    }

    /// Membership test with additive slack `tol` on the defining inequalities.
    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        match self {
            Domain::Box { lower, upper } => {
                x.len() == lower.len()
                    && x.iter()
                        .zip(lower.iter().zip(upper.iter()))
                        .all(|(&v, (&l, &u))| v >= l - tol && v <= u + tol)
            }
            Domain::Ball { center, radius } => {
                x.len() == center.len() && (x - center).norm() <= radius + tol
            }
            Domain::Unconstrained => true,
        }
    }
}
