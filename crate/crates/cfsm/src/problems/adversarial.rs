use crate::core::{ComponentStream, Constants, Domain, RngHandle, Vector};
use crate::error::{Error, Result};

/// Two-dimensional stream on the box `[-1, 1]^2` that forces any method
/// querying few gradients to miss a hidden coupling term.
///
/// All components are the base quadratic `x1^2 + x2^2` except two:
///
/// - a hidden index `k < i_star` carries `f_k(x) = x1^2 + x2^2 + (x1 - x2)^2`,
/// - the target index carries `f_{i_star}(x) = (x1 - 1)^2 + x1^2 + x2^2`.
///
/// Every component is 2-strongly convex, 6-smooth, and `6 sqrt(2)`-Lipschitz
/// on the box. Starting from the origin, every component except `f_{i_star}`
/// has zero gradient at every point of the axis `x2 = 0` reachable without
/// touching `f_k`, so a method that never queries `f_k` keeps its iterates on
/// that axis. The prefix objective at the target stage `i = i_star` is
///
/// `g_i(x) = x1^2 + x2^2 + (1/i)(x1 - x2)^2 + (1/i)(x1 - 1)^2`,
///
/// whose best value on the axis exceeds the true optimum by exactly
/// [`adversarial_gap`]`(i)`, a `1/i^4`-order penalty.
#[derive(Clone, Debug)]
pub struct AdversarialInstance {
    n: usize,
    i_star: usize,
    k: usize,
}

impl AdversarialInstance {
    /// Instance with `n` stages targeting stage `i_star`, hiding the coupled
    /// component at a seeded uniform draw `k` from `1..=i_star-1`.
    pub fn new(n: usize, i_star: usize, seed: u64) -> Result<Self> {
        if i_star < 2 || i_star > n {
            return Err(Error::invalid_input(format!(
                "target stage must satisfy 2 <= i_star <= n, got i_star={i_star}, n={n}"
            )));
        }
        let k = RngHandle::from_seed(seed).uniform_index(1, i_star - 1);
        Self::with_hidden_index(n, i_star, k)
    }

    /// Deterministic variant with an explicit hidden index.
    pub fn with_hidden_index(n: usize, i_star: usize, k: usize) -> Result<Self> {
        if i_star < 2 || i_star > n {
            return Err(Error::invalid_input(format!(
                "target stage must satisfy 2 <= i_star <= n, got i_star={i_star}, n={n}"
            )));
        }
        if k == 0 || k >= i_star {
            return Err(Error::invalid_input(format!(
                "hidden index must satisfy 1 <= k < i_star, got k={k}, i_star={i_star}"
            )));
        }
        Ok(Self { n, i_star, k })
    }

    pub fn domain() -> Domain {
        Domain::symmetric_box(2, 1.0).expect("static box construction cannot fail")
    }

    pub fn target_stage(&self) -> usize {
        self.i_star
    }

    pub fn hidden_index(&self) -> usize {
        self.k
    }

    /// Unconstrained minimizer of the target-stage prefix objective:
    /// `((i+1)/(i^2+3i+1), 1/(i^2+3i+1))`. It lies strictly inside the box,
    /// so it is also the constrained optimum.
    pub fn unconstrained_optimum(i: usize) -> Result<Vector> {
        if i < 2 {
            return Err(Error::invalid_input("target-stage closed forms need i >= 2"));
        }
        let i = i as f64;
        let denom = i * i + 3.0 * i + 1.0;
        Ok(Vector::from_column_slice(&[(i + 1.0) / denom, 1.0 / denom]))
    }

    /// Minimizer and value of the target-stage prefix objective restricted to
    /// the axis `x2 = 0`: `w* = 1/(i+2)` with value `(i+1)/(i(i+2))`.
    pub fn restricted_optimum(i: usize) -> Result<(f64, f64)> {
        if i < 2 {
            return Err(Error::invalid_input("target-stage closed forms need i >= 2"));
        }
        let i = i as f64;
        Ok((1.0 / (i + 2.0), (i + 1.0) / (i * (i + 2.0))))
    }
}

impl ComponentStream for AdversarialInstance {
    fn stages(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        2
    }

    fn constants(&self) -> Constants {
        Constants {
            mu: 2.0,
            l: 6.0,
            g: 6.0 * 2.0f64.sqrt(),
        }
    }

    fn value(&self, j: usize, x: &Vector) -> f64 {
        let base = x[0] * x[0] + x[1] * x[1];
        if j == self.i_star {
            let r = x[0] - 1.0;
            r * r + base
        } else if j == self.k {
            let r = x[0] - x[1];
            base + r * r
        } else {
            base
        }
    }

    fn gradient_uncounted(&self, j: usize, x: &Vector) -> Vector {
        let mut g = Vector::from_column_slice(&[2.0 * x[0], 2.0 * x[1]]);
        if j == self.i_star {
            g[0] += 2.0 * (x[0] - 1.0);
        } else if j == self.k {
            let r = 2.0 * (x[0] - x[1]);
            g[0] += r;
            g[1] -= r;
        }
        g
    }
}

/// Suboptimality forced on any target-stage output lying on the axis
/// `x2 = 0`: `1/(i^4 + 5i^3 + 7i^2 + 2i)`.
pub fn adversarial_gap(i: usize) -> Result<f64> {
    if i < 2 {
        return Err(Error::invalid_input(format!("gap formula needs stage i >= 2, got {i}")));
    }
    let i = i as f64;
    Ok(1.0 / (i.powi(4) + 5.0 * i.powi(3) + 7.0 * i * i + 2.0 * i))
}
