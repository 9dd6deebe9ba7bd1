use super::{FoLedger, Vector};
use crate::error::{Error, Result};

/// Regularity constants of a component stream over its reference domain.
///
/// `mu` is the strong-convexity modulus of every component, `l` the common
/// smoothness constant, and `g` a bound on component gradient norms. `g` may
/// be infinite when no bounded reference set is known; schedules that need it
/// reject such streams with a configuration error.
#[derive(Clone, Copy, Debug)]
pub struct Constants {
    pub mu: f64,
    pub l: f64,
    pub g: f64,
}

impl Constants {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid_input(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.l >= self.mu && self.l.is_finite()) {
            return Err(Error::invalid_input(format!(
                "smoothness L = {} must be finite and at least mu = {}",
                self.l, self.mu
            )));
        }
        if !(self.g >= 0.0) {
            return Err(Error::invalid_input(format!("gradient bound G = {} must be nonnegative", self.g)));
        }
        Ok(())
    }
}

/// A fixed-length stream of component functions `f_1, ..., f_n`.
///
/// Components are 1-indexed, matching the stage numbering: stage `i` reveals
/// component `i` and asks for an approximate minimizer of the prefix average
/// `g_i(x) = (1/i) Σ_{j≤i} f_j(x)`.
///
/// Gradient access comes in two flavors. Solvers call [`gradient`], which
/// bills exactly one FO to the supplied ledger. Verification code that must
/// not contaminate an algorithm's FO count either brings its own shadow
/// ledger or calls [`gradient_uncounted`] directly.
///
/// Implementations are immutable after construction and safe to share across
/// threads.
///
/// [`gradient`]: ComponentStream::gradient
/// [`gradient_uncounted`]: ComponentStream::gradient_uncounted
pub trait ComponentStream {
    /// Number of stages `n`.
    fn stages(&self) -> usize;

    /// Ambient dimension `d`.
    fn dim(&self) -> usize;

    /// Regularity constants valid for every component.
    fn constants(&self) -> Constants;

    /// `f_j(x)`. Free of FO cost.
    ///
    /// Panics if `j` is outside `1..=stages()`; component indices are
    /// solver-internal and never come from user input.
    fn value(&self, j: usize, x: &Vector) -> f64;

    /// `∇f_j(x)` without billing any ledger. Same indexing contract as
    /// [`ComponentStream::value`].
    fn gradient_uncounted(&self, j: usize, x: &Vector) -> Vector;

    /// `∇f_j(x)`, billing exactly one FO to `ledger`.
    fn gradient(&self, j: usize, x: &Vector, ledger: &FoLedger) -> Vector {
        ledger.tick();
        self.gradient_uncounted(j, x)
    }
}

fn check_stage(stream: &impl ComponentStream, i: usize) -> Result<()> {
    if i == 0 || i > stream.stages() {
        return Err(Error::invalid_input(format!(
            "stage {i} out of range 1..={}",
            stream.stages()
        )));
    }
    Ok(())
}

/// Prefix objective `g_i(x) = (1/i) Σ_{j≤i} f_j(x)`. Does not touch any
/// ledger (value evaluations are FO-free).
pub fn prefix_value(stream: &impl ComponentStream, i: usize, x: &Vector) -> Result<f64> {
    check_stage(stream, i)?;
    let sum: f64 = (1..=i).map(|j| stream.value(j, x)).sum();
    Ok(sum / i as f64)
}

/// Prefix gradient `∇g_i(x) = (1/i) Σ_{j≤i} ∇f_j(x)`. Bills exactly `i` FOs.
pub fn prefix_gradient(
    stream: &impl ComponentStream,
    i: usize,
    x: &Vector,
    ledger: &FoLedger,
) -> Result<Vector> {
    check_stage(stream, i)?;
    let mut sum = stream.gradient(1, x, ledger);
    for j in 2..=i {
        sum += stream.gradient(j, x, ledger);
    }
    Ok(sum / i as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::QuadraticStream;
    use approx::assert_relative_eq;

    fn centers(slices: &[&[f64]]) -> Vec<Vector> {
        slices.iter().map(|s| Vector::from_column_slice(s)).collect()
    }

    #[test]
    fn prefix_value_at_stage_one_is_the_first_component() {
        let stream =
            QuadraticStream::new(centers(&[&[1.0, 2.0], &[3.0, -1.0]]), 1.0, 5.0).unwrap();
        let x = Vector::from_column_slice(&[0.5, 0.5]);
        assert_relative_eq!(
            prefix_value(&stream, 1, &x).unwrap(),
            stream.value(1, &x),
            max_relative = 1e-15
        );
    }

    #[test]
    fn identical_components_average_to_themselves() {
        let c = vec![Vector::from_column_slice(&[1.0, -2.0]); 6];
        let stream = QuadraticStream::new(c, 0.5, 5.0).unwrap();
        let x = Vector::from_column_slice(&[0.3, 0.9]);
        let f1 = stream.value(1, &x);
        for i in 1..=6 {
            assert_relative_eq!(prefix_value(&stream, i, &x).unwrap(), f1, max_relative = 1e-14);
        }
    }

    #[test]
    fn prefix_gradient_matches_closed_form_mean_for_quadratics() {
        // f_j(x) = ||x - c_j||^2 gives prefix gradient 2(x - mean(c_1..c_i)).
        let cs = centers(&[&[1.0, 0.0], &[0.0, 1.0], &[2.0, 2.0]]);
        let stream = QuadraticStream::new(cs.clone(), 1.0, 5.0).unwrap();
        let x = Vector::from_column_slice(&[0.25, -0.75]);
        let ledger = FoLedger::new();
        for i in 1..=3 {
            let mean = cs[..i]
                .iter()
                .fold(Vector::zeros(2), |acc, c| acc + c)
                / i as f64;
            let expected = (&x - &mean) * 2.0;
            let got = prefix_gradient(&stream, i, &x, &ledger).unwrap();
            assert_relative_eq!(got, expected, max_relative = 1e-14);
        }
    }

    #[test]
    fn prefix_gradient_bills_exactly_i_fos() {
        let stream =
            QuadraticStream::new(centers(&[&[0.0], &[1.0], &[2.0], &[3.0]]), 1.0, 5.0).unwrap();
        let x = Vector::from_column_slice(&[0.1]);
        for i in 1..=4 {
            let ledger = FoLedger::new();
            prefix_gradient(&stream, i, &x, &ledger).unwrap();
            assert_eq!(ledger.count(), i as u64);
        }
    }

    #[test]
    fn out_of_range_stage_is_rejected() {
        let stream = QuadraticStream::new(centers(&[&[0.0]]), 1.0, 5.0).unwrap();
        let x = Vector::from_column_slice(&[0.0]);
        assert!(prefix_value(&stream, 0, &x).is_err());
        assert!(prefix_value(&stream, 2, &x).is_err());
        let ledger = FoLedger::new();
        assert!(prefix_gradient(&stream, 2, &x, &ledger).is_err());
        assert_eq!(ledger.count(), 0, "failed calls must not bill FOs");
    }
}
