use crate::core::{is_finite, ComponentStream, Constants, RngHandle, Vector};
use crate::error::{Error, Result};

/// Stream of isotropic quadratics `f_j(x) = scale * ||x - c_j||^2`.
///
/// The stage-`i` optimum is exactly the mean of the first `i` centers and the
/// optimality gap at `x` is `scale * ||x - mean_i||^2`, which makes this the
/// reference family for verifying algorithmic identities: every quantity has
/// a closed form.
///
/// All components share the Hessian `2*scale*I`, so `mu = L = 2*scale`. The
/// gradient bound `g` is taken over a ball of radius `reference_radius`
/// around the origin; pass the radius of the domain you intend to optimize
/// over (it must also cover the centers for the bound to be valid).
#[derive(Clone, Debug)]
pub struct QuadraticStream {
    centers: Vec<Vector>,
    scale: f64,
    constants: Constants,
}

impl QuadraticStream {
    pub fn new(centers: Vec<Vector>, scale: f64, reference_radius: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::invalid_input("quadratic stream needs at least one center"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid_input(format!("scale must be positive, got {scale}")));
        }
        if !(reference_radius > 0.0 && reference_radius.is_finite()) {
            return Err(Error::invalid_input("reference radius must be positive and finite"));
        }
        let d = centers[0].len();
        if centers.iter().any(|c| c.len() != d || !is_finite(c)) {
            return Err(Error::invalid_input("centers must be finite and share one dimension"));
        }
        let max_center = centers.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let constants = Constants {
            mu: 2.0 * scale,
            l: 2.0 * scale,
            // sup over the reference ball of 2*scale*||x - c_j||
            g: 2.0 * scale * (reference_radius + max_center),
        };
        Ok(Self { centers, scale, constants })
    }

    /// `n` centers drawn uniformly from the ball of radius `center_radius`.
    pub fn random(
        n: usize,
        d: usize,
        center_radius: f64,
        scale: f64,
        reference_radius: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = RngHandle::from_seed(seed);
        let mut centers = Vec::with_capacity(n);
        for _ in 0..n {
            // Direction from a spherical Gaussian, length from the radial CDF.
            let dir = Vector::from_fn(d, |_, _| rng.normal());
            let norm = dir.norm();
            let dir = if norm > 0.0 { dir / norm } else { Vector::zeros(d) };
            let r = center_radius * rng.uniform().powf(1.0 / d as f64);
            centers.push(dir * r);
        }
        Self::new(centers, scale, reference_radius)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Exact prefix optimum `x*_i = mean(c_1..c_i)`.
    pub fn exact_optimum(&self, i: usize) -> Result<Vector> {
        if i == 0 || i > self.centers.len() {
            return Err(Error::invalid_input(format!(
                "stage {i} out of range 1..={}",
                self.centers.len()
            )));
        }
        let mut mean = Vector::zeros(self.dim());
        for c in &self.centers[..i] {
            mean += c;
        }
        Ok(mean / i as f64)
    }

    /// Exact optimality gap `g_i(x) - g_i(x*_i) = scale * ||x - x*_i||^2`.
    pub fn gap(&self, i: usize, x: &Vector) -> Result<f64> {
        let opt = self.exact_optimum(i)?;
        Ok(self.scale * (x - opt).norm_squared())
    }
}

impl ComponentStream for QuadraticStream {
    fn stages(&self) -> usize {
        self.centers.len()
    }

    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn constants(&self) -> Constants {
        self.constants
    }

    fn value(&self, j: usize, x: &Vector) -> f64 {
        self.scale * (x - &self.centers[j - 1]).norm_squared()
    }

    fn gradient_uncounted(&self, j: usize, x: &Vector) -> Vector {
        (x - &self.centers[j - 1]) * (2.0 * self.scale)
    }
}

/// Whether the optimum-drift bound holds between stages `i` and `i + j`:
/// `||x*_{i+j} - x*_i|| <= 2 j G / (mu (2i + j))`.
///
/// The bound holds for every stream of `mu`-strongly convex, `G`-Lipschitz
/// components, so a `false` return indicates a bug (wrong optima or
/// constants), not an unlucky instance.
pub fn drift_bound_check(stream: &QuadraticStream, i: usize, j: usize) -> Result<bool> {
    let a = stream.exact_optimum(i)?;
    let b = stream.exact_optimum(i + j)?;
    let c = stream.constants();
    let bound = 2.0 * j as f64 * c.g / (c.mu * (2 * i + j) as f64);
    Ok((b - a).norm() <= bound + 1e-12)
}
