use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::core::{is_finite, ComponentStream, Constants, RngHandle, Vector};
use crate::error::{Error, Result};

/// Ridge regression stream: component `j` is
/// `f_j(x) = (a_j^T x - b_j)^2 + lambda * ||x||^2`.
///
/// The regularizer sits in every component, so each `f_j` is `2*lambda`
/// strongly convex on its own and the prefix average
/// `g_i(x) = (1/i) Σ_{j≤i} (a_j^T x - b_j)^2 + lambda ||x||^2`
/// has the exact optimum `(Σ a_j a_j^T / i + lambda I)^{-1} (Σ b_j a_j / i)`,
/// solvable in closed form at every stage (see [`RidgeExact`]).
///
/// The smoothness constant follows the convention `L = 2 lambda_max(Σ a_j
/// a_j^T / n) + 2 lambda` (top eigenvalue of the averaged Gram matrix, found
/// by power iteration). The gradient bound is infinite until
/// [`with_gradient_radius`] supplies the radius of a reference ball; only
/// schedules that need a finite `G` care.
///
/// [`with_gradient_radius`]: RidgeStream::with_gradient_radius
#[derive(Clone, Debug)]
pub struct RidgeStream {
    rows: Vec<(Vector, f64)>,
    lambda: f64,
    dim: usize,
    constants: Constants,
}

impl RidgeStream {
    pub fn new(rows: Vec<(Vector, f64)>, lambda: f64) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid_input("ridge stream needs at least one row"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid_input(format!("lambda must be positive, got {lambda}")));
        }
        let dim = rows[0].0.len();
        if dim == 0 {
            return Err(Error::invalid_input("ridge rows must have at least one feature"));
        }
        for (j, (a, b)) in rows.iter().enumerate() {
            if a.len() != dim || !is_finite(a) || !b.is_finite() {
                return Err(Error::invalid_input(format!(
                    "row {} is non-finite or has dimension {} instead of {}",
                    j + 1,
                    a.len(),
                    dim
                )));
            }
        }
        let n = rows.len();
        let mut gram = DMatrix::<f64>::zeros(dim, dim);
        for (a, _) in &rows {
            gram.ger(1.0, a, a, 1.0);
        }
        let l = 2.0 * power_iteration_lambda_max(&(gram / n as f64)) + 2.0 * lambda;
        let constants = Constants {
            mu: 2.0 * lambda,
            l,
            g: f64::INFINITY,
        };
        Ok(Self { rows, lambda, dim, constants })
    }

    /// Sets the gradient bound `G` to its closed form over the ball of radius
    /// `radius` around the origin.
    pub fn with_gradient_radius(mut self, radius: f64) -> Result<Self> {
        let (_, _, g) = estimate_constants(&self, radius)?;
        self.constants.g = g;
        Ok(self)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Row `j` (1-indexed).
    pub fn row(&self, j: usize) -> (&Vector, f64) {
        let (a, b) = &self.rows[j - 1];
        (a, *b)
    }

    /// Exact stage-`i` optimum and its prefix-objective value, from a fresh
    /// incremental solve. Use [`RidgeExact`] when sweeping all stages.
    pub fn exact_optimum(&self, i: usize) -> Result<(Vector, f64)> {
        if i == 0 || i > self.rows.len() {
            return Err(Error::invalid_input(format!(
                "stage {i} out of range 1..={}",
                self.rows.len()
            )));
        }
        let mut exact = RidgeExact::new(self);
        for _ in 0..i {
            exact.advance(self)?;
        }
        Ok((exact.optimum().clone(), exact.optimal_value()))
    }
}

impl ComponentStream for RidgeStream {
    fn stages(&self) -> usize {
        self.rows.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn constants(&self) -> Constants {
        self.constants
    }

    fn value(&self, j: usize, x: &Vector) -> f64 {
        let (a, b) = &self.rows[j - 1];
        let r = a.dot(x) - b;
        r * r + self.lambda * x.norm_squared()
    }

    fn gradient_uncounted(&self, j: usize, x: &Vector) -> Vector {
        let (a, b) = &self.rows[j - 1];
        let r = a.dot(x) - b;
        a * (2.0 * r) + x * (2.0 * self.lambda)
    }
}

/// Regularity constants `(mu, L, G)` of a ridge stream over the ball of
/// radius `radius`.
///
/// `mu = 2 lambda` exactly. `L = 2 lambda_max(mean Gram) + 2 lambda`, with
/// the top eigenvalue from power iteration (relative tolerance 1e-6, at most
/// 1000 sweeps; if the iteration has not settled by then the best estimate so
/// far is used). `G` bounds `||∇f_j||` over the ball:
/// `2 max_j ||a_j|| (||a_j|| R + |b_j|) + 2 lambda R`.
pub fn estimate_constants(stream: &RidgeStream, radius: f64) -> Result<(f64, f64, f64)> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid_input(format!(
            "gradient-bound radius must be positive and finite, got {radius}"
        )));
    }
    let mu = 2.0 * stream.lambda;
    let l = stream.constants.l;
    let worst_row = stream
        .rows
        .iter()
        .map(|(a, b)| a.norm() * (a.norm() * radius + b.abs()))
        .fold(0.0, f64::max);
    let g = 2.0 * worst_row + 2.0 * stream.lambda * radius;
    Ok((mu, l, g))
}

/// Top eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration. Deterministic start vector; relative tolerance 1e-6, capped at
/// 1000 sweeps (the current Rayleigh quotient is returned if the cap hits).
fn power_iteration_lambda_max(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    // Slightly uneven start so we do not begin orthogonal to the principal
    // eigenvector of structured (e.g. permutation-symmetric) matrices.
    let mut v = Vector::from_fn(d, |k, _| 1.0 + 0.01 * (k as f64 + 1.0));
    v /= v.norm();
    let mut lam = 0.0;
    for _ in 0..1000 {
        let mv = m * &v;
        let norm = mv.norm();
        if norm <= f64::MIN_POSITIVE {
            return 0.0;
        }
        v = mv / norm;
        let next = (m * &v).dot(&v);
        if (next - lam).abs() <= 1e-6 * next.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        lam = next;
    }
    lam
}

/// Incremental exact-optimum tracker for a ridge stream.
///
/// Maintains the unnormalized prefix accumulators
/// `Gram_i = Σ_{j≤i} a_j a_j^T`, `h_i = Σ b_j a_j`, `c_i = Σ b_j^2`
/// under rank-1 updates, and solves the regularized normal equations
/// `(Gram_i / i + lambda I) x = h_i / i` by Cholesky at each stage, so a full
/// n-stage sweep costs O(n d^2) accumulator work plus n dense solves. With
/// the accumulators in hand, any prefix value
/// `g_i(x) = (x^T Gram_i x - 2 h_i^T x + c_i)/i + lambda ||x||^2`
/// and hence any optimality gap is an O(d^2) evaluation.
///
/// Each solve is verified: if the residual exceeds `1e-10 * ||rhs||` one step
/// of iterative refinement runs, and failure after that is a numeric error.
#[derive(Clone, Debug)]
pub struct RidgeExact {
    lambda: f64,
    stage: usize,
    gram: DMatrix<f64>,
    h: Vector,
    bsq: f64,
    optimum: Vector,
    optimal_value: f64,
}

impl RidgeExact {
    pub fn new(stream: &RidgeStream) -> Self {
        let d = stream.dim();
        Self {
            lambda: stream.lambda,
            stage: 0,
            gram: DMatrix::zeros(d, d),
            h: Vector::zeros(d),
            bsq: 0.0,
            optimum: Vector::zeros(d),
            optimal_value: f64::NAN,
        }
    }

    /// Stages absorbed so far; 0 before the first [`advance`](Self::advance).
    pub fn stage(&self) -> usize {
        self.stage
    }

    /// Absorb the next row and recompute the stage optimum.
    pub fn advance(&mut self, stream: &RidgeStream) -> Result<()> {
        if self.stage >= stream.stages() {
            return Err(Error::invalid_input(format!(
                "cannot advance past the final stage {}",
                stream.stages()
            )));
        }
        self.stage += 1;
        let (a, b) = stream.row(self.stage);
        self.gram.ger(1.0, a, a, 1.0);
        self.h.axpy(b, a, 1.0);
        self.bsq += b * b;

        let i = self.stage as f64;
        let d = self.h.len();
        let mut sys = &self.gram / i;
        for k in 0..d {
            sys[(k, k)] += self.lambda;
        }
        let rhs = &self.h / i;
        let chol = nalgebra::linalg::Cholesky::new(sys.clone())
            .ok_or_else(|| Error::numeric("normal-equation matrix is not positive definite"))?;
        let mut x = chol.solve(&rhs);
        let tol = 1e-10 * rhs.norm().max(f64::MIN_POSITIVE);
        let residual = &rhs - &sys * &x;
        if residual.norm() > tol {
            x += chol.solve(&residual);
            let residual = &rhs - &sys * &x;
            if residual.norm() > tol {
                return Err(Error::numeric(format!(
                    "normal-equation solve at stage {} has residual {:.3e} (tolerance {:.3e})",
                    self.stage,
                    residual.norm(),
                    tol
                )));
            }
        }
        if !is_finite(&x) {
            return Err(Error::numeric("normal-equation solve returned non-finite entries"));
        }
        self.optimal_value = self.quadratic_form(&x);
        self.optimum = x;
        Ok(())
    }

    /// `g_i(x)` for the current stage `i`, via the cached accumulators.
    pub fn prefix_value(&self, x: &Vector) -> f64 {
        assert!(self.stage >= 1, "advance the tracker before evaluating");
        self.quadratic_form(x)
    }

    fn quadratic_form(&self, x: &Vector) -> f64 {
        let i = self.stage as f64;
        (x.dot(&(&self.gram * x)) - 2.0 * self.h.dot(x) + self.bsq) / i
            + self.lambda * x.norm_squared()
    }

    /// Exact optimum of the current stage.
    pub fn optimum(&self) -> &Vector {
        assert!(self.stage >= 1, "advance the tracker before reading the optimum");
        &self.optimum
    }

    /// `g_i(x*_i)` for the current stage.
    pub fn optimal_value(&self) -> f64 {
        assert!(self.stage >= 1, "advance the tracker before reading the optimum");
        self.optimal_value
    }

    /// Optimality gap `g_i(x) - g_i(x*_i)` at the current stage.
    pub fn gap(&self, x: &Vector) -> f64 {
        self.prefix_value(x) - self.optimal_value()
    }
}

/// Scale each feature column into `[-1, 1]` by dividing by its maximum
/// absolute value (all-zero columns are left alone). Returns the per-feature
/// divisors that were applied.
pub fn standardize_features(rows: &mut [(Vector, f64)]) -> Vec<f64> {
    if rows.is_empty() {
        return Vec::new();
    }
    let d = rows[0].0.len();
    let mut scales = vec![0.0f64; d];
    for (a, _) in rows.iter() {
        for k in 0..d {
            scales[k] = scales[k].max(a[k].abs());
        }
    }
    for s in &mut scales {
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    for (a, _) in rows.iter_mut() {
        for k in 0..d {
            a[k] /= scales[k];
        }
    }
    scales
}

/// Specification of a synthetic ridge instance, serializable so experiment
/// configs can pin the exact data.
///
/// Rows are unit directions blended from one shared direction `v` and a
/// per-row isotropic part, then scaled to a common length:
/// `a_j = row_scale * unit( sqrt(alignment) v + sqrt(1 - alignment) u_j )`,
/// with `u_j` a scaled Gaussian. Fixing every `||a_j|| = row_scale` keeps the
/// per-component smoothness uniform; `alignment` controls how much spectral
/// mass the mean Gram matrix puts on its top direction (and therefore the
/// ratio between the averaged `L` and the per-component one). Targets are
/// `b_j = a_j^T w + noise * xi_j` for a unit-norm `w` aligned with `v`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticRidge {
    pub n: usize,
    pub d: usize,
    pub lambda: f64,
    pub seed: u64,
    pub row_scale: f64,
    pub alignment: f64,
    pub noise: f64,
}

impl Default for SyntheticRidge {
    fn default() -> Self {
        Self {
            n: 2000,
            d: 20,
            lambda: 1e-3,
            seed: 0,
            row_scale: 0.22,
            alignment: 0.5,
            noise: 0.1,
        }
    }
}

impl SyntheticRidge {
    pub fn generate(&self) -> Result<RidgeStream> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::invalid_config("synthetic ridge needs n >= 1 and d >= 1"));
        }
        if !(0.0..1.0).contains(&self.alignment) {
            return Err(Error::invalid_config(format!(
                "alignment must lie in [0, 1), got {}",
                self.alignment
            )));
        }
        if !(self.row_scale > 0.0) || !(self.noise >= 0.0) {
            return Err(Error::invalid_config("row_scale must be positive and noise nonnegative"));
        }
        let mut rng = RngHandle::from_seed(self.seed);
        let v = {
            let raw = Vector::from_fn(self.d, |_, _| rng.normal());
            let norm = raw.norm();
            if norm > 0.0 { raw / norm } else { Vector::from_element(self.d, (self.d as f64).sqrt().recip()) }
        };
        let w = v.clone();
        let shared = self.alignment.sqrt();
        let iso = (1.0 - self.alignment).sqrt() / (self.d as f64).sqrt();
        let mut rows = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let u = Vector::from_fn(self.d, |_, _| rng.normal());
            let raw = &v * shared + u * iso;
            let a = &raw * (self.row_scale / raw.norm());
            let b = a.dot(&w) + self.noise * rng.normal();
            rows.push((a, b));
        }
        RidgeStream::new(rows, self.lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{prefix_gradient, prefix_value, FoLedger};
    use approx::assert_relative_eq;

    fn v(coords: &[f64]) -> Vector {
        Vector::from_column_slice(coords)
    }

    fn small_stream(seed: u64, n: usize, d: usize) -> RidgeStream {
        SyntheticRidge {
            n,
            d,
            lambda: 1e-3,
            seed,
            ..SyntheticRidge::default()
        }
        .generate()
        .unwrap()
    }

    #[test]
    fn single_row_optimum_matches_hand_solution() {
        let lambda = 1e-3;
        let stream = RidgeStream::new(vec![(v(&[1.0, 0.0]), 1.0)], lambda).unwrap();
        let (opt, _) = stream.exact_optimum(1).unwrap();
        assert_relative_eq!(opt[0], 1.0 / (1.0 + lambda), max_relative = 1e-12);
        assert_relative_eq!(opt[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn huge_regularizer_pulls_the_optimum_to_zero() {
        let stream = RidgeStream::new(vec![(v(&[1.0, 2.0]), 3.0), (v(&[0.5, -1.0]), 1.0)], 1e6).unwrap();
        let (opt, _) = stream.exact_optimum(2).unwrap();
        assert!(opt.norm() < 1e-5, "optimum should collapse toward zero, got {opt}");
    }

    #[test]
    fn prefix_gradient_vanishes_at_the_exact_optimum() {
        let stream = small_stream(4, 40, 6);
        let ledger = FoLedger::new();
        for i in [1, 3, 17, 40] {
            let (opt, _) = stream.exact_optimum(i).unwrap();
            let grad = prefix_gradient(&stream, i, &opt, &ledger).unwrap();
            assert!(grad.norm() <= 1e-8, "stage {i}: |∇g_i(x*_i)| = {}", grad.norm());
        }
    }

    #[test]
    fn smoothness_constant_for_single_row() {
        let lambda = 1e-3;
        let stream = RidgeStream::new(vec![(v(&[1.0, 0.0]), 1.0)], lambda).unwrap();
        assert_relative_eq!(stream.constants().l, 2.0 + 2.0 * lambda, max_relative = 1e-5);
    }

    #[test]
    fn smoothness_constant_for_orthonormal_rows() {
        // Mean Gram of the d standard basis vectors is I/d.
        let lambda = 1e-3;
        let rows: Vec<(Vector, f64)> = (0..4)
            .map(|k| {
                let mut a = Vector::zeros(4);
                a[k] = 1.0;
                (a, 1.0)
            })
            .collect();
        let stream = RidgeStream::new(rows, lambda).unwrap();
        assert_relative_eq!(stream.constants().l, 2.0 / 4.0 + 2.0 * lambda, max_relative = 1e-5);
    }

    #[test]
    fn strong_convexity_is_twice_lambda() {
        for lambda in [1e-4, 1e-2, 1.0] {
            let stream = RidgeStream::new(vec![(v(&[0.3, 0.4]), 0.2)], lambda).unwrap();
            assert_eq!(stream.constants().mu, 2.0 * lambda);
        }
    }

    #[test]
    fn gradient_bound_matches_the_closed_form() {
        let lambda = 1e-3;
        let stream = RidgeStream::new(vec![(v(&[0.6, 0.8]), 2.0)], lambda).unwrap();
        let (mu, _, g) = estimate_constants(&stream, 3.0).unwrap();
        // ||a|| = 1, so G = 2 * 1 * (1 * 3 + 2) + 2 lambda * 3.
        assert_relative_eq!(g, 10.0 + 6.0 * lambda, max_relative = 1e-12);
        assert_eq!(mu, 2.0 * lambda);
    }

    #[test]
    fn accumulators_match_from_scratch_sums() {
        let stream = small_stream(9, 30, 5);
        let mut exact = RidgeExact::new(&stream);
        for i in 1..=30 {
            exact.advance(&stream).unwrap();
            let mut gram = DMatrix::<f64>::zeros(5, 5);
            let mut h = Vector::zeros(5);
            for j in 1..=i {
                let (a, b) = stream.row(j);
                gram.ger(1.0, a, a, 1.0);
                h.axpy(b, a, 1.0);
            }
            assert_relative_eq!(exact.gram, gram, max_relative = 1e-12);
            assert_relative_eq!(exact.h, h, max_relative = 1e-12);
        }
    }

    #[test]
    fn cached_prefix_value_matches_direct_summation() {
        let stream = small_stream(12, 25, 4);
        let mut rng = RngHandle::from_seed(5);
        let mut exact = RidgeExact::new(&stream);
        for i in 1..=25 {
            exact.advance(&stream).unwrap();
            let x = Vector::from_fn(4, |_, _| rng.normal());
            let direct = prefix_value(&stream, i, &x).unwrap();
            assert_relative_eq!(exact.prefix_value(&x), direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn component_gradients_match_finite_differences() {
        let stream = small_stream(3, 10, 3);
        let mut rng = RngHandle::from_seed(8);
        let h = 1e-6;
        for j in [1, 5, 10] {
            let x = Vector::from_fn(3, |_, _| rng.normal());
            let grad = stream.gradient_uncounted(j, &x);
            for k in 0..3 {
                let mut plus = x.clone();
                let mut minus = x.clone();
                plus[k] += h;
                minus[k] -= h;
                let fd = (stream.value(j, &plus) - stream.value(j, &minus)) / (2.0 * h);
                assert_relative_eq!(grad[k], fd, max_relative = 1e-5, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn one_shot_optimum_agrees_with_the_incremental_tracker() {
        let stream = small_stream(21, 15, 4);
        let mut exact = RidgeExact::new(&stream);
        for i in 1..=15 {
            exact.advance(&stream).unwrap();
            let (opt, val) = stream.exact_optimum(i).unwrap();
            assert_relative_eq!(&opt, exact.optimum(), max_relative = 1e-12);
            assert_relative_eq!(val, exact.optimal_value(), max_relative = 1e-12);
        }
    }

    #[test]
    fn synthetic_rows_have_the_requested_geometry() {
        let spec = SyntheticRidge { n: 50, d: 8, seed: 2, ..SyntheticRidge::default() };
        let stream = spec.generate().unwrap();
        assert_eq!(stream.stages(), 50);
        assert_eq!(stream.dim(), 8);
        for j in 1..=50 {
            let (a, b) = stream.row(j);
            assert_relative_eq!(a.norm(), spec.row_scale, max_relative = 1e-12);
            assert!(b.is_finite());
        }
        // Same seed, same data.
        let again = spec.generate().unwrap();
        for j in 1..=50 {
            assert_eq!(stream.row(j).0, again.row(j).0);
            assert_eq!(stream.row(j).1, again.row(j).1);
        }
    }

    #[test]
    fn standardization_scales_columns_into_unit_range() {
        let mut rows = vec![(v(&[2.0, -0.5, 0.0]), 1.0), (v(&[-4.0, 0.25, 0.0]), -1.0)];
        let scales = standardize_features(&mut rows);
        assert_eq!(scales, vec![4.0, 0.5, 1.0]);
        for (a, _) in &rows {
            assert!(a.iter().all(|x| x.abs() <= 1.0 + 1e-15));
        }
        assert_relative_eq!(rows[0].0[0], 0.5, max_relative = 1e-15);
        assert_relative_eq!(rows[0].0[1], -1.0, max_relative = 1e-15);
    }
}
