//! Brute-force oracles and property suites for the solver's structural
//! claims.
//!
//! Each suite re-checks one load-bearing identity or inequality with an
//! independent computation: estimator means by full enumeration instead of
//! sampling, aggregates by direct summation, optimum drift against analytic
//! optima, the adversarial gap against a numerical minimizer that never sees
//! the closed forms. Suites are deterministic (fixed internal seeds) and
//! report one [`OracleReport`] each.
//!
//! Oracle gradient evaluations go through private shadow ledgers, so running
//! a suite never inflates an algorithm's FO count; the oracle functions do
//! not even accept an external ledger.

use crate::core::{
    prefix_gradient, prefix_value, ComponentStream, Domain, FoLedger, RngHandle, Vector,
};
use crate::csvrg::{
    csvrg_run_observed, CsvrgConfig, CsvrgObserver, RoundSnapshot, Schedule, StepMode,
};
use crate::error::{Error, Result};
use crate::problems::{
    adversarial_gap, drift_bound_check, AdversarialInstance, QuadraticStream, RidgeStream,
    SyntheticRidge,
};

/// Outcome of one oracle or one whole suite.
///
/// `pass` is always `max_violation <= tolerance`; reports from the same suite
/// can be folded together with [`absorb`](OracleReport::absorb).
#[derive(Clone, Debug)]
pub struct OracleReport {
    pub suite: String,
    pub cases: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(suite: &str, cases: usize, max_violation: f64, tolerance: f64) -> Self {
        Self {
            suite: suite.to_string(),
            cases,
            max_violation,
            tolerance,
            pass: max_violation <= tolerance,
        }
    }

    /// Fold another report of the same suite into this one: cases add up,
    /// the worst violation wins.
    pub fn absorb(&mut self, other: &OracleReport) {
        debug_assert_eq!(self.suite, other.suite);
        debug_assert_eq!(self.tolerance, other.tolerance);
        self.cases += other.cases;
        self.max_violation = self.max_violation.max(other.max_violation);
        self.pass = self.max_violation <= self.tolerance;
    }

    /// Machine-readable row: `suite,cases,max_violation,tolerance,pass`.
    pub fn line(&self) -> String {
        format!(
            "{},{},{:.6e},{:.6e},{}",
            self.suite, self.cases, self.max_violation, self.tolerance, self.pass
        )
    }
}

/// One algorithm-consistent inner-round state, captured from a live run.
///
/// The fields are exactly what the estimator sees: current iterate, anchor
/// point, stage-`(i-1)` aggregate, plus the staleness parameter of the
/// generating run (the variance bound depends on it).
#[derive(Clone, Debug)]
pub struct ReachableState {
    pub i: usize,
    pub t: usize,
    pub prev: usize,
    pub x_cur: Vector,
    pub x_prev_hat: Vector,
    pub agg: Vector,
    pub alpha: f64,
}

/// Observer that snapshots every inner round into a vector of
/// [`ReachableState`]s.
pub struct StateCollector {
    alpha: f64,
    pub states: Vec<ReachableState>,
}

impl StateCollector {
    pub fn new(alpha: f64) -> Self {
        Self { alpha, states: Vec::new() }
    }
}

impl CsvrgObserver for StateCollector {
    fn round(&mut self, s: &RoundSnapshot<'_>) {
        self.states.push(ReachableState {
            i: s.i,
            t: s.t,
            prev: s.prev,
            x_cur: s.x.clone(),
            x_prev_hat: s.x_prev_hat.clone(),
            agg: s.agg.clone(),
            alpha: self.alpha,
        });
    }
}

/// Run CSVRG on `stream` and return every inner-round state it visited.
pub fn collect_states<S: ComponentStream>(
    stream: &S,
    domain: &Domain,
    config: &CsvrgConfig,
) -> Result<Vec<ReachableState>> {
    let ledger = FoLedger::new();
    let mut collector = StateCollector::new(config.alpha);
    csvrg_run_observed(stream, domain, config, &ledger, &mut collector)?;
    Ok(collector.states)
}

fn check_state_shape<S: ComponentStream>(stream: &S, state: &ReachableState) -> Result<()> {
    if state.i < 2 {
        return Err(Error::invalid_stage(state.i, "oracle states need at least one past component"));
    }
    if state.i > stream.stages() {
        return Err(Error::invalid_stage(
            state.i,
            format!("stream has only {} stages", stream.stages()),
        ));
    }
    if state.prev == 0 || state.prev >= state.i {
        return Err(Error::invalid_input(format!(
            "anchor stage {} is not in 1..{} and cannot come from a run",
            state.prev, state.i
        )));
    }
    let d = stream.dim();
    if state.x_cur.len() != d || state.x_prev_hat.len() != d || state.agg.len() != d {
        return Err(Error::invalid_input("state dimensions do not match the stream"));
    }
    Ok(())
}

/// Unbiasedness oracle: enumerate the estimator over every `u` in
/// `1..=i-1`, average, and compare against the directly computed prefix
/// gradient at `x_cur`. The violation is the discrepancy norm relative to
/// `max(1, ||grad||)`; tolerance 1e-10.
///
/// The aggregate is *measured*, not trusted: a corrupted `agg` shifts every
/// enumerated estimator by `(1 - 1/i)` times the corruption and shows up as a
/// failing report of exactly that size. Structurally impossible states
/// (anchor at or after the current stage, dimension mismatches) are rejected
/// as errors instead.
pub fn unbias_oracle<S: ComponentStream>(stream: &S, state: &ReachableState) -> Result<OracleReport> {
    check_state_shape(stream, state)?;
    let shadow = FoLedger::new();
    let i = state.i;
    let mut mean = Vector::zeros(stream.dim());
    for u in 1..i {
        let est = crate::csvrg::estimator(
            stream,
            i,
            u,
            &state.x_cur,
            &state.x_prev_hat,
            &state.agg,
            &shadow,
        )?;
        mean.axpy(1.0 / (i - 1) as f64, &est, 1.0);
    }
    let direct = prefix_gradient(stream, i, &state.x_cur, &shadow)?;
    let violation = (&mean - &direct).norm() / direct.norm().max(1.0);
    Ok(OracleReport::new("unbias", 1, violation, 1e-10))
}

/// Streams whose exact stage optima are available in closed form, which the
/// variance oracle needs for both distance terms of its bound.
pub trait KnownOptima: ComponentStream {
    fn optimum(&self, i: usize) -> Result<Vector>;

    /// Smoothness constant valid for every *single* component. Defaults to
    /// the stream constant; override when that constant describes the
    /// averaged objective instead (ridge).
    fn component_smoothness(&self) -> f64 {
        self.constants().l
    }
}

impl KnownOptima for QuadraticStream {
    fn optimum(&self, i: usize) -> Result<Vector> {
        self.exact_optimum(i)
    }
}

impl KnownOptima for RidgeStream {
    fn optimum(&self, i: usize) -> Result<Vector> {
        Ok(self.exact_optimum(i)?.0)
    }

    fn component_smoothness(&self) -> f64 {
        let worst = (1..=self.stages())
            .map(|j| self.row(j).0.norm_squared())
            .fold(0.0, f64::max);
        2.0 * worst + 2.0 * self.lambda()
    }
}

/// Variance oracle: enumerate the estimator deviation second moment
/// `(1/(i-1)) Σ_u ||est_u - ∇g_i(x)||^2` and check it against
/// `8 L^2 ||x - x*_i||^2 + 64 L^2 G^2 alpha^2 / mu^2 + 16 L^2 ||x̂_prev -
/// x*_prev||^2`, with `L` the per-component smoothness. The violation is the
/// signed slack `lhs - rhs` (typically very negative); tolerance 1e-10.
pub fn variance_oracle<S: KnownOptima>(stream: &S, state: &ReachableState) -> Result<OracleReport> {
    check_state_shape(stream, state)?;
    let c = stream.constants();
    if !c.g.is_finite() {
        return Err(Error::invalid_input(
            "variance bound needs a finite gradient bound; supply one on the stream",
        ));
    }
    let l = stream.component_smoothness();
    let shadow = FoLedger::new();
    let i = state.i;
    let direct = prefix_gradient(stream, i, &state.x_cur, &shadow)?;
    let mut second_moment = 0.0;
    for u in 1..i {
        let est = crate::csvrg::estimator(
            stream,
            i,
            u,
            &state.x_cur,
            &state.x_prev_hat,
            &state.agg,
            &shadow,
        )?;
        second_moment += (est - &direct).norm_squared() / (i - 1) as f64;
    }
    let x_star_i = stream.optimum(i)?;
    let x_star_prev = stream.optimum(state.prev)?;
    let rhs = 8.0 * l * l * (&state.x_cur - &x_star_i).norm_squared()
        + 64.0 * l * l * c.g * c.g * state.alpha * state.alpha / (c.mu * c.mu)
        + 16.0 * l * l * (&state.x_prev_hat - &x_star_prev).norm_squared();
    Ok(OracleReport::new("variance", 1, second_moment - rhs, 1e-10))
}

/// Result of [`lowerbound_demo`]: a run of a budget-limited natural method on
/// the adversarial instance, targeting its final stage.
#[derive(Clone, Debug)]
pub struct LowerBoundDemo {
    pub stage: usize,
    pub measured_gap: f64,
    pub analytic_bound: f64,
    /// The hidden component index `k` of the instance.
    pub hidden_component: usize,
    /// Whether the method happened to query `f_k` at the target stage. When
    /// it did not, `measured_gap >= analytic_bound - 1e-12` is asserted.
    pub hidden_queried: bool,
    /// Components queried at the target stage (at most `(i-1)/2` of them).
    pub queried: Vec<usize>,
    pub fos_at_target: u64,
}

/// Demonstrate the lower bound: a natural first-order method that spends at
/// most `(i-1)/2` FOs at the target stage `i = n` of the adversarial
/// instance cannot beat the analytic gap unless it happens to query the
/// hidden component.
///
/// Before the target stage every component gradient vanishes at the origin,
/// so the method's iterates are exactly `(0, 0)` there (asserted). At the
/// target, the method queries the newly revealed component (which points
/// along the first axis), steps onto the axis, then queries a random subset
/// of earlier components at the new point. If the hidden component is not in
/// the subset, every observed gradient is axis-aligned, the output stays on
/// the axis, and its gap is at least `adversarial_gap(i)`; this is checked
/// with slack 1e-12 and any miss is a numeric error.
pub fn lowerbound_demo(n: usize, seed: u64) -> Result<LowerBoundDemo> {
    if n < 4 {
        return Err(Error::invalid_input("the demo needs at least 4 stages"));
    }
    let instance = AdversarialInstance::new(n, n, seed)?;
    let domain = AdversarialInstance::domain();
    let ledger = FoLedger::new();
    let mut rng = RngHandle::from_seed(seed ^ 0x5eed);
    let i = n;

    // Stages before the target: whatever the method queries, gradients at the
    // origin vanish, so the iterate never moves.
    let origin = Vector::zeros(2);
    for j in 1..i {
        let budget = (j - 1) / 2;
        let mut x_hat = origin.clone();
        for q in 1..=budget.min(j) {
            let grad = instance.gradient(q, &x_hat, &ledger);
            x_hat = domain.project(&(&x_hat - grad))?;
        }
        if x_hat[0] != 0.0 || x_hat[1] != 0.0 {
            return Err(Error::numeric(format!(
                "pre-target stage {j} drifted off the origin to {x_hat}"
            )));
        }
    }

    // Target stage: one FO on the new component, step onto the axis, then
    // spend the rest of the budget on a uniform subset of older components.
    let budget = (i - 1) / 2;
    let before = ledger.count();
    let first = instance.gradient(i, &origin, &ledger);
    let x_probe = domain.project(&(&origin - first * 0.25))?;
    let mut pool: Vec<usize> = (1..i).collect();
    let mut queried = vec![i];
    for slot in 0..budget.saturating_sub(1) {
        let pick = rng.uniform_index(slot, pool.len() - 1);
        pool.swap(slot, pick);
        queried.push(pool[slot]);
        // The gradient itself is what a real method would consume; only the
        // query set matters for the argument.
        let _ = instance.gradient(pool[slot], &x_probe, &ledger);
    }
    let fos_at_target = ledger.count() - before;
    let hidden = instance.hidden_index();
    let hidden_queried = queried.contains(&hidden);

    // Output the exact minimizer of the queried average over the span the
    // method has seen: the first axis when the hidden component stayed
    // unqueried, the whole plane otherwise.
    let q = queried.len() as f64;
    let output = if hidden_queried {
        // Queried average: q(w^2 + z^2) + (w - z)^2 + (w - 1)^2, up to 1/q.
        let denom = q * q + 3.0 * q + 1.0;
        Vector::from_column_slice(&[(q + 1.0) / denom, 1.0 / denom])
    } else {
        // On the axis the queried average is ((q - 1) w^2 + (w-1)^2 + w^2)/q.
        Vector::from_column_slice(&[1.0 / (q + 1.0), 0.0])
    };
    let output = domain.project(&output)?;

    let optimum = AdversarialInstance::unconstrained_optimum(i)?;
    let measured_gap =
        prefix_value(&instance, i, &output)? - prefix_value(&instance, i, &optimum)?;
    let analytic_bound = adversarial_gap(i)?;
    if !hidden_queried {
        if output[1] != 0.0 {
            return Err(Error::numeric("axis-restricted output left the axis"));
        }
        if measured_gap < analytic_bound - 1e-12 {
            return Err(Error::numeric(format!(
                "gap {measured_gap:.3e} beat the analytic bound {analytic_bound:.3e} \
                 without querying the hidden component"
            )));
        }
    }
    Ok(LowerBoundDemo {
        stage: i,
        measured_gap,
        analytic_bound,
        hidden_component: hidden,
        hidden_queried,
        queried,
        fos_at_target,
    })
}

fn practical_config(alpha: f64, t: usize, base_step: f64, seed: u64) -> CsvrgConfig {
    CsvrgConfig {
        alpha,
        schedule: Schedule::Fixed { t },
        step_mode: StepMode::Practical { base_step },
        seed,
        stage1_epsilon: 1e-12,
    }
}

fn theoretical_step_config(alpha: f64, t: usize, seed: u64) -> CsvrgConfig {
    CsvrgConfig {
        alpha,
        schedule: Schedule::Fixed { t },
        step_mode: StepMode::Theoretical,
        seed,
        stage1_epsilon: 1e-12,
    }
}

fn quadratic_collection(
    n: usize,
    d: usize,
    t: usize,
    seed: u64,
) -> Result<(QuadraticStream, Vec<ReachableState>)> {
    let stream = QuadraticStream::random(n, d, 1.0, 0.5, 2.0, seed)?;
    let domain = Domain::ball(Vector::zeros(d), 2.0)?;
    let config = theoretical_step_config(0.3, t, seed.wrapping_add(1));
    let states = collect_states(&stream, &domain, &config)?;
    Ok((stream, states))
}

fn ridge_collection(
    n: usize,
    d: usize,
    t: usize,
    seed: u64,
) -> Result<(RidgeStream, Vec<ReachableState>)> {
    let spec = SyntheticRidge { n, d, seed, ..SyntheticRidge::default() };
    let radius = 3.0;
    let stream = spec.generate()?.with_gradient_radius(radius)?;
    let domain = Domain::ball(Vector::zeros(d), radius)?;
    let config = practical_config(0.3, t, 1.0 / spec.lambda, seed.wrapping_add(1));
    let states = collect_states(&stream, &domain, &config)?;
    Ok((stream, states))
}

/// Estimator unbiasedness by full enumeration over reachable states from
/// quadratic and ridge runs.
pub fn unbias_suite() -> Result<OracleReport> {
    let mut report = OracleReport::new("unbias", 0, 0.0, 1e-10);
    let (quad, states) = quadratic_collection(60, 4, 3, 11)?;
    for state in &states {
        report.absorb(&unbias_oracle(&quad, state)?);
    }
    let (ridge, states) = ridge_collection(50, 6, 2, 23)?;
    for state in &states {
        report.absorb(&unbias_oracle(&ridge, state)?);
    }
    Ok(report)
}

struct AggregateChecker<'a, S> {
    stream: &'a S,
    cases: usize,
    worst: f64,
}

impl<S: ComponentStream> CsvrgObserver for AggregateChecker<'_, S> {
    fn fum_entry(&mut self, i: usize, _prev: usize, x_prev_hat: &Vector, agg: &Vector) {
        let shadow = FoLedger::new();
        let direct = prefix_gradient(self.stream, i - 1, x_prev_hat, &shadow)
            .expect("stage index comes from a live run");
        let violation = (agg - &direct).norm() / direct.norm().max(1.0);
        self.worst = self.worst.max(violation);
        self.cases += 1;
    }
}

/// Aggregate identity at every inner-solver entry of a full run on a
/// synthetic ridge stream (n = 500, d = 10): the maintained aggregate must
/// equal the direct sum `(1/(i-1)) Σ_{k<i} ∇f_k(x̂_prev)`.
pub fn aggregate_suite() -> Result<OracleReport> {
    let spec = SyntheticRidge { n: 500, d: 10, seed: 7, ..SyntheticRidge::default() };
    let stream = spec.generate()?;
    let domain = Domain::ball(Vector::zeros(10), 3.0)?;
    let config = practical_config(0.3, 100, 1.0 / spec.lambda, 41);
    let ledger = FoLedger::new();
    let mut checker = AggregateChecker { stream: &stream, cases: 0, worst: 0.0 };
    csvrg_run_observed(&stream, &domain, &config, &ledger, &mut checker)?;
    Ok(OracleReport::new("aggregate", checker.cases, checker.worst, 1e-10))
}

/// Recompute sparsity and FO accounting over an `(n, alpha)` grid: the
/// number of full-recompute events must respect the `ceil(ln(n)/alpha)` cap
/// and the ledger must match the closed-form decomposition exactly.
pub fn sparsity_suite() -> Result<OracleReport> {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for &n in &[10usize, 100, 1000] {
        let stream = QuadraticStream::random(n, 2, 1.0, 0.5, 2.0, n as u64)?;
        let domain = Domain::ball(Vector::zeros(2), 2.0)?;
        for &alpha in &[0.05, 0.1, 0.3, 0.5] {
            let config = theoretical_step_config(alpha, 2, 3);
            let ledger = FoLedger::new();
            let run = crate::csvrg::csvrg_run(&stream, &domain, &config, &ledger)?;

            let cap = ((n as f64).ln() / alpha).ceil() as u64;
            let events = run.recompute_stages.len() as u64;
            let recompute_sum: u64 =
                run.recompute_stages.iter().map(|&i| (2 * i - 1) as u64).sum();
            let fum = 3 * 2 * (n as u64 - 1);
            let cheap = (n as u64 - 1) - events;
            let expected = run.stage1_fos + fum + recompute_sum + cheap;

            let mut violation = events.saturating_sub(cap) as f64;
            violation += run.total_fos.abs_diff(expected) as f64;
            violation += ledger.count().abs_diff(run.total_fos) as f64;
            violation += recompute_sum.saturating_sub(2 * n as u64 * cap) as f64;
            worst = worst.max(violation);
            cases += 1;
        }
    }
    Ok(OracleReport::new("sparsity", cases, worst, 0.0))
}

/// Optimum drift against the analytic bound on 100 random quadratic
/// instances, every valid `(i, j)` pair.
pub fn drift_suite() -> Result<OracleReport> {
    let n = 50;
    let mut cases = 0;
    let mut violations = 0u64;
    for seed in 0..100 {
        let stream = QuadraticStream::random(n, 3, 1.0, 0.5, 2.0, seed)?;
        for i in 1..n {
            for j in 1..=(n - i) {
                if !drift_bound_check(&stream, i, j)? {
                    violations += 1;
                }
                cases += 1;
            }
        }
    }
    Ok(OracleReport::new("drift", cases, violations as f64, 0.0))
}

/// Estimator variance bound on reachable states from quadratic and ridge
/// runs (the reported violation is the signed slack, normally far below 0).
pub fn variance_suite() -> Result<OracleReport> {
    let mut report = OracleReport::new("variance", 0, f64::NEG_INFINITY, 1e-10);
    let (quad, states) = quadratic_collection(60, 3, 4, 2)?;
    for state in &states {
        report.absorb(&variance_oracle(&quad, state)?);
    }
    let (ridge, states) = ridge_collection(40, 5, 3, 5)?;
    for state in &states {
        report.absorb(&variance_oracle(&ridge, state)?);
    }
    Ok(report)
}

/// Projected gradient descent on the prefix objective, used as the
/// independent minimizer for the adversarial suite. Knows nothing about the
/// instance's closed forms.
fn numeric_prefix_minimum<S: ComponentStream>(
    stream: &S,
    domain: &Domain,
    i: usize,
    step: f64,
    iters: usize,
) -> Result<Vector> {
    let shadow = FoLedger::new();
    let mut x = domain.project(&Vector::zeros(stream.dim()))?;
    for _ in 0..iters {
        let grad = prefix_gradient(stream, i, &x, &shadow)?;
        x = domain.project(&(&x - grad * step))?;
    }
    Ok(x)
}

/// Bisection on the sign of a strictly increasing-through-zero derivative
/// over `[lo, hi]`; converges to the root at machine precision.
fn derivative_bisection(mut dphi: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..110 {
        let mid = 0.5 * (lo + hi);
        if dphi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Adversarial-instance gap formula against independent numerical
/// minimization for every stage in `2..=50`: minimize the prefix objective
/// over the box and over the first axis numerically, and compare the value
/// difference (and both minimizer locations) with the closed forms.
pub fn adversarial_suite() -> Result<OracleReport> {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for i in 2..=50usize {
        let instance = AdversarialInstance::new(i, i, 1000 + i as u64)?;
        let domain = AdversarialInstance::domain();
        let shadow = FoLedger::new();
        // Prefix Hessians are bounded by 2 + 6/i <= 5, so step 1/5 is safe.
        let full_min = numeric_prefix_minimum(&instance, &domain, i, 0.2, 600)?;
        let full_value = prefix_value(&instance, i, &full_min)?;
        let axis_w = derivative_bisection(
            |w| {
                prefix_gradient(&instance, i, &Vector::from_column_slice(&[w, 0.0]), &shadow)
                    .expect("stage in range")[0]
            },
            -1.0,
            1.0,
        );
        let axis_value = prefix_value(&instance, i, &Vector::from_column_slice(&[axis_w, 0.0]))?;

        let measured = axis_value - full_value;
        let formula = adversarial_gap(i)?;
        let mut violation = (measured - formula).abs();

        // The minimizer locations have closed forms too; fold them in.
        let expected_full = AdversarialInstance::unconstrained_optimum(i)?;
        violation = violation.max((&full_min - &expected_full).norm());
        violation = violation.max((axis_w - 1.0 / (i as f64 + 2.0)).abs());
        let expected_axis_value = (i as f64 + 1.0) / (i as f64 * (i as f64 + 2.0));
        violation = violation.max((axis_value - expected_axis_value).abs());

        worst = worst.max(violation);
        cases += 1;
    }
    Ok(OracleReport::new("adversarial", cases, worst, 1e-9))
}

/// Names of the available suites, in canonical order.
pub const SUITE_NAMES: &[&str] =
    &["unbias", "aggregate", "sparsity", "drift", "variance", "adversarial"];

/// Run one suite by name.
pub fn run_suite(name: &str) -> Result<OracleReport> {
    match name {
        "unbias" => unbias_suite(),
        "aggregate" => aggregate_suite(),
        "sparsity" => sparsity_suite(),
        "drift" => drift_suite(),
        "variance" => variance_suite(),
        "adversarial" => adversarial_suite(),
        other => Err(Error::invalid_config(format!(
            "unknown suite '{other}'; expected one of {}",
            SUITE_NAMES.join(", ")
        ))),
    }
}

/// Run every suite in canonical order.
pub fn run_all() -> Result<Vec<OracleReport>> {
    SUITE_NAMES.iter().map(|name| run_suite(name)).collect()
}
