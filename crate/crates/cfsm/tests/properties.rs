//! Property tests for the structural invariants: projection geometry, FO
//! accounting, prefix-oracle consistency, solver feasibility, and averaging
//! weights.

use cfsm::csvrg::{csvrg_run_observed, CsvrgConfig, CsvrgObserver, FumParams, RoundSnapshot};
use cfsm::problems::{QuadraticStream, SyntheticRidge};
use cfsm::{prefix_gradient, prefix_value, ComponentStream, Domain, FoLedger, Vector};
use proptest::prelude::*;

fn vector(coords: &[f64]) -> Vector {
    Vector::from_column_slice(coords)
}

fn domain_for(kind: usize, d: usize, scale: f64, offset: f64) -> Domain {
    match kind {
        0 => Domain::ball(Vector::from_element(d, offset), scale).unwrap(),
        1 => {
            let lower = Vector::from_fn(d, |k, _| offset - scale * (k + 1) as f64);
            let upper = Vector::from_fn(d, |k, _| offset + scale / (k + 1) as f64);
            Domain::bounds(lower, upper).unwrap()
        }
        _ => Domain::Unconstrained,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn projection_is_idempotent_and_nonexpansive(
        kind in 0usize..3,
        d in 1usize..5,
        scale in 0.2f64..4.0,
        offset in -2.0f64..2.0,
        coords in prop::collection::vec(-8.0f64..8.0, 8),
    ) {
        let domain = domain_for(kind, d, scale, offset);
        let x = vector(&coords[..d]);
        let y = vector(&coords[4..4 + d]);
        let px = domain.project(&x).unwrap();
        let py = domain.project(&y).unwrap();
        prop_assert!(domain.contains(&px, 1e-12));
        prop_assert!((&domain.project(&px).unwrap() - &px).norm() <= 1e-12);
        prop_assert!((&px - &py).norm() <= (&x - &y).norm() + 1e-12);
    }
}

proptest! {
    #[test]
    fn ledger_matches_hand_counted_gradient_calls(
        script in prop::collection::vec((0usize..4, 1usize..=10), 0..40),
    ) {
        let stream = QuadraticStream::random(10, 2, 1.0, 0.5, 2.0, 3).unwrap();
        let ledger = FoLedger::new();
        let x = vector(&[0.3, -0.8]);
        let mut hand = 0u64;
        for (op, j) in script {
            match op {
                0 => {
                    stream.gradient(j, &x, &ledger);
                    hand += 1;
                }
                1 => {
                    prefix_gradient(&stream, j, &x, &ledger).unwrap();
                    hand += j as u64;
                }
                2 => {
                    stream.value(j, &x);
                }
                _ => {
                    stream.gradient_uncounted(j, &x);
                }
            }
        }
        prop_assert_eq!(ledger.count(), hand);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn prefix_gradient_matches_central_differences(
        seed in 0u64..50,
        i in 1usize..=15,
        coords in prop::collection::vec(-1.5f64..1.5, 3),
        ridge in any::<bool>(),
    ) {
        let x = vector(&coords);
        let shadow = FoLedger::new();
        let (analytic, fd) = if ridge {
            let spec = SyntheticRidge {
                n: 15,
                d: 3,
                seed,
                ..SyntheticRidge::default()
            };
            let stream = spec.generate().unwrap();
            (
                prefix_gradient(&stream, i, &x, &shadow).unwrap(),
                central_differences(&stream, i, &x),
            )
        } else {
            let stream = QuadraticStream::random(15, 3, 1.0, 0.7, 2.0, seed).unwrap();
            (
                prefix_gradient(&stream, i, &x, &shadow).unwrap(),
                central_differences(&stream, i, &x),
            )
        };
        let scale = analytic.norm().max(1.0);
        prop_assert!(
            (&fd - &analytic).norm() <= 1e-5 * scale,
            "finite differences {:?} vs analytic {:?}",
            fd,
            analytic
        );
    }
}

fn central_differences(stream: &impl ComponentStream, i: usize, x: &Vector) -> Vector {
    let h = 1e-6;
    Vector::from_fn(x.len(), |k, _| {
        let mut hi = x.clone();
        let mut lo = x.clone();
        hi[k] += h;
        lo[k] -= h;
        (prefix_value(stream, i, &hi).unwrap() - prefix_value(stream, i, &lo).unwrap()) / (2.0 * h)
    })
}

/// Panics inside the run if any state the solver touches leaves the domain.
struct FeasibilityCheck<'a> {
    domain: &'a Domain,
}

impl CsvrgObserver for FeasibilityCheck<'_> {
    fn round(&mut self, snapshot: &RoundSnapshot<'_>) {
        assert!(self.domain.contains(snapshot.x, 1e-12), "iterate left the domain");
        assert!(self.domain.contains(snapshot.x_prev_hat, 1e-12), "anchor left the domain");
    }

    fn stage_done(&mut self, _i: usize, x_hat: &Vector, _agg: &Vector, _prev: usize) {
        assert!(self.domain.contains(x_hat, 1e-12), "stage output left the domain");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn csvrg_iterates_stay_feasible(
        seed in 0u64..1_000,
        alpha in 0.05f64..0.9,
        t in 1usize..8,
        radius in 0.3f64..2.5,
    ) {
        let stream = QuadraticStream::random(12, 3, 1.0, 0.5, radius, seed).unwrap();
        let domain = Domain::ball(Vector::zeros(3), radius).unwrap();
        let config = CsvrgConfig::practical(alpha, t, 5.0, seed);
        let ledger = FoLedger::new();
        let mut check = FeasibilityCheck { domain: &domain };
        let run = csvrg_run_observed(&stream, &domain, &config, &ledger, &mut check).unwrap();
        for stage in &run.outputs {
            prop_assert!(domain.contains(&stage.x_hat, 1e-12));
        }
    }
}

proptest! {
    #[test]
    fn fum_weights_form_a_convex_combination(beta in 1.0f64..500.0, t in 1usize..400) {
        let params = FumParams::with_beta(beta, t).unwrap();
        let sum: f64 = (0..t).map(|round| params.weight(round)).sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12, "weights sum to {sum}");
        prop_assert!((0..t).all(|round| params.weight(round) >= 0.0));
    }
}
