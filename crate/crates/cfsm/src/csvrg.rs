//! Continual stochastic variance-reduced gradient method (CSVRG).
//!
//! One run processes the stream stage by stage. Stage 1 is a plain projected
//! gradient descent on `f_1`. Every later stage `i` runs a fixed number of
//! inner rounds (the frequent-update inner solver, [`fum_stage`]), each
//! spending exactly 3 FOs on the estimator
//!
//! `(1 - 1/i) (∇f_u(x) - ∇f_u(x̂_prev) + Δ_{i-1}) + (1/i) ∇f_i(x)`
//!
//! with `u` uniform on `1..=i-1`. Here `x̂_prev` is the anchor: the last
//! stage whose full prefix gradient was computed exactly, and `Δ_{i-1}` the
//! maintained aggregate `(1/(i-1)) Σ_{k≤i-1} ∇f_k(x̂_prev)`. Taking the
//! average over `u` shows the estimator is unbiased for `∇g_i(x)`, and its
//! deviation shrinks with both the distance to the anchor and `1/i`.
//!
//! The aggregate is kept correct at 1 FO per stage by the cheap update
//! `Δ_i = (1 - 1/i) Δ_{i-1} + (1/i) ∇f_i(x̂_prev)`. Only when the anchor
//! becomes stale (`i - prev >= alpha * i`) does the run pay for full prefix
//! gradients again; the staleness test fires O(log(n)/alpha) times over n
//! stages, which keeps the total FO bill near-linear in n.

use crate::core::{prefix_gradient, ComponentStream, Domain, FoLedger, RngHandle, Vector};
use crate::error::{Error, Result};

/// Inner-round budget per stage.
#[derive(Clone, Debug)]
pub enum Schedule {
    /// Rounds chosen by [`theoretical_schedule`] for accuracy `epsilon`.
    /// Requires finite stream constants; the counts are astronomically large
    /// unless `mu`, `L`, `G` are all O(1).
    Theoretical { epsilon: f64 },
    /// The same budget at every stage (the desk-scale default).
    Fixed { t: usize },
    /// Explicit table; entry `i - 1` is the budget of stage `i`.
    Custom { t_per_stage: Vec<usize> },
}

/// Inner step-size rule.
#[derive(Clone, Debug)]
pub enum StepMode {
    /// `gamma_t = 4 / (mu (t + beta))` with rounds indexed from 0.
    Theoretical,
    /// `gamma_t = base_step / (i (t + 1))` at stage `i`. With
    /// `base_step = 1/lambda` this is the ridge-regression tuning
    /// `(i t lambda)^{-1}`; rounds are indexed from 1 here so the first step
    /// is finite.
    Practical { base_step: f64 },
}

/// Full configuration of a CSVRG run.
#[derive(Clone, Debug)]
pub struct CsvrgConfig {
    /// Staleness parameter in (0, 1): stage `i` refreshes its anchor when
    /// `i - prev >= alpha * i`. Smaller values refresh more often.
    pub alpha: f64,
    pub schedule: Schedule,
    pub step_mode: StepMode,
    pub seed: u64,
    /// Accuracy target of the stage-1 gradient descent solve.
    pub stage1_epsilon: f64,
}

impl CsvrgConfig {
    /// Desk-scale configuration: fixed inner budget and practical steps.
    pub fn practical(alpha: f64, t: usize, base_step: f64, seed: u64) -> Self {
        Self {
            alpha,
            schedule: Schedule::Fixed { t },
            step_mode: StepMode::Practical { base_step },
            seed,
            stage1_epsilon: 1e-12,
        }
    }

    /// Fully theoretical configuration for accuracy `epsilon`; `alpha` comes
    /// from [`theoretical_schedule`] evaluated on the stream constants.
    pub fn theoretical(constants: crate::core::Constants, epsilon: f64, seed: u64) -> Result<Self> {
        let (_, alpha) = theoretical_schedule(constants.mu, constants.l, constants.g, epsilon, 1)?;
        Ok(Self {
            alpha,
            schedule: Schedule::Theoretical { epsilon },
            step_mode: StepMode::Theoretical,
            seed,
            stage1_epsilon: epsilon,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid_config(format!(
                "alpha must lie strictly inside (0, 1), got {}",
                self.alpha
            )));
        }
        match &self.schedule {
            Schedule::Theoretical { epsilon } => {
                if !(epsilon.is_finite() && *epsilon > 0.0) {
                    return Err(Error::invalid_config("theoretical schedule needs epsilon > 0"));
                }
            }
            Schedule::Fixed { t } => {
                if *t < 1 {
                    return Err(Error::invalid_config("fixed schedule needs t >= 1"));
                }
            }
            Schedule::Custom { t_per_stage } => {
                if t_per_stage.iter().any(|&t| t < 1) {
                    return Err(Error::invalid_config("custom schedule entries must be >= 1"));
                }
            }
        }
        if let StepMode::Practical { base_step } = self.step_mode {
            if !(base_step.is_finite() && base_step > 0.0) {
                return Err(Error::invalid_config("practical step mode needs base_step > 0"));
            }
        }
        if !(self.stage1_epsilon.is_finite() && self.stage1_epsilon > 0.0) {
            return Err(Error::invalid_config("stage1_epsilon must be positive"));
        }
        Ok(())
    }
}

/// Averaging parameters of one inner solve.
///
/// The output is the weighted average `(1/Z) Σ_{t=0}^{T-1} (t + beta - 1)
/// x^{t+1}` with `Z = Σ_{t=0}^{T-1} (t + beta - 1) = T(T-1)/2 + T(beta - 1)`,
/// so the weights form a convex combination by construction.
#[derive(Clone, Copy, Debug)]
pub struct FumParams {
    pub beta: f64,
    pub t: usize,
    pub z: f64,
}

impl FumParams {
    /// Standard coupling `beta = 72 L^2 / mu^2`.
    pub fn new(mu: f64, l: f64, t: usize) -> Result<Self> {
        if !(mu > 0.0 && l >= mu && l.is_finite()) {
            return Err(Error::invalid_config(format!(
                "need 0 < mu <= L < inf, got mu={mu}, L={l}"
            )));
        }
        Self::with_beta(72.0 * (l / mu) * (l / mu), t)
    }

    /// Explicit `beta >= 1` (keeps every weight `t + beta - 1` nonnegative).
    pub fn with_beta(beta: f64, t: usize) -> Result<Self> {
        if t < 1 {
            return Err(Error::invalid_config("inner budget must be at least one round"));
        }
        if !(beta.is_finite() && beta >= 1.0) {
            return Err(Error::invalid_config(format!("beta must be finite and >= 1, got {beta}")));
        }
        let tf = t as f64;
        let z = tf * (tf - 1.0) / 2.0 + tf * (beta - 1.0);
        if !(z > 0.0) {
            return Err(Error::invalid_config("degenerate averaging normalizer"));
        }
        Ok(Self { beta, t, z })
    }

    /// Weight of the iterate produced in round `t` (0-indexed).
    pub fn weight(&self, t: usize) -> f64 {
        (t as f64 + self.beta - 1.0) / self.z
    }
}

/// State snapshot handed to observers before each inner round.
#[derive(Debug)]
pub struct RoundSnapshot<'a> {
    pub i: usize,
    /// Inner round, 0-indexed.
    pub t: usize,
    /// Anchor stage whose output is `x_prev_hat`.
    pub prev: usize,
    /// Current iterate (the point the estimator is evaluated at).
    pub x: &'a Vector,
    pub x_prev_hat: &'a Vector,
    /// Aggregate direction for the previous stage, `Δ_{i-1}`.
    pub agg: &'a Vector,
}

/// Hook into a run for verification and tracing. All methods default to
/// no-ops; `()` is the silent observer.
#[allow(unused_variables)]
pub trait CsvrgObserver {
    /// Before the inner solver starts at stage `i >= 2`.
    fn fum_entry(&mut self, i: usize, prev: usize, x_prev_hat: &Vector, agg: &Vector) {}
    /// Before each inner round, with the state the estimator will see.
    fn round(&mut self, snapshot: &RoundSnapshot<'_>) {}
    /// After stage `i` finished and its aggregate was brought up to date.
    fn stage_done(&mut self, i: usize, x_hat: &Vector, agg: &Vector, prev: usize) {}
}

impl CsvrgObserver for () {}

/// The 3-FO variance-reduced estimator of `∇g_i(x_cur)`:
/// `(1 - 1/i)(∇f_u(x_cur) - ∇f_u(x_prev_hat) + agg) + (1/i) ∇f_i(x_cur)`.
///
/// `agg` must be the stage-`(i-1)` aggregate at the anchor `x_prev_hat`;
/// averaging over all `u` in `1..=i-1` then telescopes to the exact prefix
/// gradient.
pub fn estimator<S: ComponentStream>(
    stream: &S,
    i: usize,
    u: usize,
    x_cur: &Vector,
    x_prev_hat: &Vector,
    agg: &Vector,
    ledger: &FoLedger,
) -> Result<Vector> {
    if i < 2 {
        return Err(Error::invalid_stage(i, "the estimator needs at least one past component"));
    }
    if i > stream.stages() {
        return Err(Error::invalid_stage(i, format!("stream has only {} stages", stream.stages())));
    }
    if u == 0 || u >= i {
        return Err(Error::invalid_input(format!(
            "component index u={u} outside 1..={}",
            i - 1
        )));
    }
    let w = 1.0 - 1.0 / i as f64;
    let g_u_cur = stream.gradient(u, x_cur, ledger);
    let g_u_anchor = stream.gradient(u, x_prev_hat, ledger);
    let g_i_cur = stream.gradient(i, x_cur, ledger);
    Ok((g_u_cur - g_u_anchor + agg) * w + g_i_cur / i as f64)
}

/// One inner solve (frequent-update method) at stage `i`.
///
/// Starting from `x_init` (the previous stage output), performs `params.t`
/// projected stochastic steps with the 3-FO estimator and returns the
/// `(t + beta - 1)`-weighted average of the produced iterates. Bills exactly
/// `3 * params.t` FOs. `prev` only annotates observer snapshots; the anchor
/// point itself is `x_prev_hat`.
#[allow(clippy::too_many_arguments)]
pub fn fum_stage<S: ComponentStream>(
    stream: &S,
    domain: &Domain,
    i: usize,
    prev: usize,
    params: &FumParams,
    step_mode: &StepMode,
    x_init: &Vector,
    x_prev_hat: &Vector,
    agg: &Vector,
    rng: &mut RngHandle,
    ledger: &FoLedger,
    observer: &mut dyn CsvrgObserver,
) -> Result<Vector> {
    if i < 2 {
        return Err(Error::invalid_stage(i, "the inner solver needs at least one past component"));
    }
    let mu = stream.constants().mu;
    let mut x = domain.project(x_init)?;
    let mut average = Vector::zeros(x.len());
    for t in 0..params.t {
        observer.round(&RoundSnapshot { i, t, prev, x: &x, x_prev_hat, agg });
        let u = rng.uniform_index(1, i - 1);
        let direction = estimator(stream, i, u, &x, x_prev_hat, agg, ledger)?;
        let gamma = match step_mode {
            StepMode::Theoretical => 4.0 / (mu * (t as f64 + params.beta)),
            StepMode::Practical { base_step } => base_step / (i as f64 * (t as f64 + 1.0)),
        };
        x = domain.project(&(&x - direction * gamma))?;
        average.axpy(params.weight(t), &x, 1.0);
    }
    Ok(average)
}

/// Cheap aggregate maintenance:
/// `Δ_i = (1 - 1/i) Δ_{i-1} + (1/i) grad_new` where `grad_new = ∇f_i(x̂_prev)`
/// (1 FO, paid by the caller).
pub fn aggregate_cheap_update(agg: &Vector, grad_new: &Vector, i: usize) -> Result<Vector> {
    if i < 2 {
        return Err(Error::invalid_stage(i, "aggregate updates start at stage 2"));
    }
    let w = 1.0 / i as f64;
    Ok(agg * (1.0 - w) + grad_new * w)
}

/// Inner budget and staleness parameter guaranteeing an `epsilon`-optimal
/// sequence:
///
/// `T_i = ceil( 720 G L^2 / (mu^{5/2} i sqrt(eps))
///            + 9 L^{2/3} G^{2/3} / (eps^{1/3} mu)
///            + 864 L^2 / mu^2 )`
/// and `alpha = mu eps^{1/3} / (20 G^{2/3} L^{2/3})`, clamped into (0, 1).
///
/// Only the first term depends on the stage, so `T_i` is nonincreasing in `i`.
pub fn theoretical_schedule(
    mu: f64,
    l: f64,
    g: f64,
    epsilon: f64,
    i: usize,
) -> Result<(usize, f64)> {
    if !(mu > 0.0 && mu.is_finite()) || !(l >= mu && l.is_finite()) {
        return Err(Error::invalid_config(format!(
            "schedule needs finite 0 < mu <= L, got mu={mu}, L={l}"
        )));
    }
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::invalid_config(format!(
            "schedule needs a finite positive gradient bound, got G={g}"
        )));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid_config(format!("schedule needs epsilon > 0, got {epsilon}")));
    }
    if i == 0 {
        return Err(Error::invalid_config("stage index must be at least 1"));
    }
    let t_real = 720.0 * g * l * l / (mu.powf(2.5) * i as f64 * epsilon.sqrt())
        + 9.0 * l.powf(2.0 / 3.0) * g.powf(2.0 / 3.0) / (epsilon.powf(1.0 / 3.0) * mu)
        + 864.0 * (l / mu) * (l / mu);
    let t = t_real.ceil().max(1.0) as usize;
    let alpha = (mu * epsilon.powf(1.0 / 3.0) / (20.0 * g.powf(2.0 / 3.0) * l.powf(2.0 / 3.0)))
        .min(1.0 - 1e-9);
    Ok((t, alpha))
}

/// Per-stage output of a run.
#[derive(Clone, Debug)]
pub struct StageOutput {
    pub stage: usize,
    pub x_hat: Vector,
    /// Ledger total right after this stage completed.
    pub cum_fos: u64,
    /// Whether this stage refreshed its anchor before the inner solve.
    pub full_recompute: bool,
}

/// Result of [`csvrg_run`]: stage outputs plus the FO decomposition
/// `total = stage1 + 3 Σ T_i + Σ_{recompute stages} (2i - 1) + #cheap updates`.
#[derive(Clone, Debug)]
pub struct CsvrgRun {
    pub outputs: Vec<StageOutput>,
    /// Stages whose staleness test fired (each cost `2i - 1` extra FOs).
    pub recompute_stages: Vec<usize>,
    pub stage1_fos: u64,
    pub fum_fos: u64,
    pub recompute_fos: u64,
    pub cheap_updates: u64,
    pub total_fos: u64,
}

/// Run CSVRG over the whole stream. See the module docs for the loop
/// structure. Deterministic given `(config, stream)`: stage `i` draws from
/// `RngHandle::stage_stream(config.seed, i)`.
pub fn csvrg_run<S: ComponentStream>(
    stream: &S,
    domain: &Domain,
    config: &CsvrgConfig,
    ledger: &FoLedger,
) -> Result<CsvrgRun> {
    csvrg_run_observed(stream, domain, config, ledger, &mut ())
}

/// [`csvrg_run`] with an observer receiving state snapshots.
pub fn csvrg_run_observed<S: ComponentStream>(
    stream: &S,
    domain: &Domain,
    config: &CsvrgConfig,
    ledger: &FoLedger,
    observer: &mut dyn CsvrgObserver,
) -> Result<CsvrgRun> {
    config.validate()?;
    let n = stream.stages();
    if n == 0 {
        return Err(Error::invalid_input("cannot run on an empty stream"));
    }
    let constants = stream.constants();
    constants.validate()?;
    match &config.schedule {
        Schedule::Theoretical { .. } => {
            if !constants.g.is_finite() {
                return Err(Error::invalid_config(
                    "theoretical schedule needs a finite gradient bound; \
                     supply one via the stream constants",
                ));
            }
        }
        Schedule::Custom { t_per_stage } => {
            if t_per_stage.len() < n {
                return Err(Error::invalid_config(format!(
                    "custom schedule has {} entries for {} stages",
                    t_per_stage.len(),
                    n
                )));
            }
        }
        Schedule::Fixed { .. } => {}
    }

    let budget = |i: usize| -> Result<usize> {
        match &config.schedule {
            Schedule::Theoretical { epsilon } => {
                Ok(theoretical_schedule(constants.mu, constants.l, constants.g, *epsilon, i)?.0)
            }
            Schedule::Fixed { t } => Ok(*t),
            Schedule::Custom { t_per_stage } => Ok(t_per_stage[i - 1]),
        }
    };

    // Stage 1: projected gradient descent on f_1 alone.
    let start = domain.project(&Vector::zeros(stream.dim()))?;
    let before_stage1 = ledger.count();
    let x1 = stage1_gradient_descent(stream, domain, &start, config.stage1_epsilon, ledger)?;
    let mut agg = stream.gradient(1, &x1, ledger);
    let stage1_fos = ledger.count() - before_stage1;

    let mut prev = 1usize;
    let mut pending_refresh = false;
    let mut x_prev_hat = x1.clone();
    let mut x_hat = x1;

    let mut outputs = Vec::with_capacity(n);
    outputs.push(StageOutput {
        stage: 1,
        x_hat: x_hat.clone(),
        cum_fos: ledger.count(),
        full_recompute: false,
    });
    observer.stage_done(1, &x_hat, &agg, prev);

    let mut recompute_stages = Vec::new();
    let mut fum_fos = 0u64;
    let mut recompute_fos = 0u64;
    let mut cheap_updates = 0u64;

    for i in 2..=n {
        let stale = (i - prev) as f64 >= config.alpha * i as f64;
        if stale {
            // Refresh the aggregate exactly at the newest output (i - 1 FOs)
            // and move the anchor there.
            let before = ledger.count();
            agg = prefix_gradient(stream, i - 1, &x_hat, ledger)?;
            recompute_fos += ledger.count() - before;
            prev = i - 1;
            x_prev_hat = x_hat.clone();
            pending_refresh = true;
            recompute_stages.push(i);
        }

        let params = FumParams::new(constants.mu, constants.l, budget(i)?)?;
        observer.fum_entry(i, prev, &x_prev_hat, &agg);
        let mut rng = RngHandle::stage_stream(config.seed, i);
        let before = ledger.count();
        x_hat = fum_stage(
            stream,
            domain,
            i,
            prev,
            &params,
            &config.step_mode,
            &x_hat,
            &x_prev_hat,
            &agg,
            &mut rng,
            ledger,
            observer,
        )?;
        fum_fos += ledger.count() - before;

        if pending_refresh {
            // Complete the refresh with an exact aggregate at the new output
            // (i FOs); the anchor becomes the current stage.
            let before = ledger.count();
            agg = prefix_gradient(stream, i, &x_hat, ledger)?;
            recompute_fos += ledger.count() - before;
            prev = i;
            x_prev_hat = x_hat.clone();
            pending_refresh = false;
        } else {
            let grad_new = stream.gradient(i, &x_prev_hat, ledger);
            agg = aggregate_cheap_update(&agg, &grad_new, i)?;
            cheap_updates += 1;
        }

        outputs.push(StageOutput {
            stage: i,
            x_hat: x_hat.clone(),
            cum_fos: ledger.count(),
            full_recompute: stale,
        });
        observer.stage_done(i, &x_hat, &agg, prev);
    }

    Ok(CsvrgRun {
        outputs,
        recompute_stages,
        stage1_fos,
        fum_fos,
        recompute_fos,
        cheap_updates,
        total_fos: ledger.count(),
    })
}

/// Projected gradient descent on `f_1` with step `1/L`, stopped once
/// `||∇f_1(x)||^2 <= 2 mu epsilon` (which bounds the value gap by `epsilon`)
/// or after `ceil((L/mu) ln(L d0^2 / epsilon))` iterations, whichever comes
/// first. `d0` is the distance-to-optimum estimate `||∇f_1(start)|| / mu`.
fn stage1_gradient_descent<S: ComponentStream>(
    stream: &S,
    domain: &Domain,
    start: &Vector,
    epsilon: f64,
    ledger: &FoLedger,
) -> Result<Vector> {
    let c = stream.constants();
    let mut x = start.clone();
    let mut cap = usize::MAX;
    let mut iter = 0usize;
    loop {
        let grad = stream.gradient(1, &x, ledger);
        if iter == 0 {
            let d0 = grad.norm() / c.mu;
            let log_arg = (c.l * d0 * d0 / epsilon).max(1.0);
            cap = ((c.l / c.mu) * log_arg.ln()).ceil().max(0.0) as usize;
        }
        if grad.norm_squared() <= 2.0 * c.mu * epsilon || iter >= cap {
            return Ok(x);
        }
        x = domain.project(&(&x - grad / c.l))?;
        iter += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::QuadraticStream;
    use approx::assert_relative_eq;

    fn v(coords: &[f64]) -> Vector {
        Vector::from_column_slice(coords)
    }

    fn scalar_stream(centers: &[f64]) -> QuadraticStream {
        let cs = centers.iter().map(|&c| v(&[c])).collect();
        QuadraticStream::new(cs, 1.0, 10.0).unwrap()
    }

    #[test]
    fn fum_weights_recover_the_worked_example() {
        // T = 3, beta = 4: Z = 3 + 12 - 3 = 12, weights 3/12, 4/12, 5/12.
        let params = FumParams::with_beta(4.0, 3).unwrap();
        assert_relative_eq!(params.z, 12.0, max_relative = 1e-15);
        assert_relative_eq!(params.weight(0), 3.0 / 12.0, max_relative = 1e-15);
        assert_relative_eq!(params.weight(1), 4.0 / 12.0, max_relative = 1e-15);
        assert_relative_eq!(params.weight(2), 5.0 / 12.0, max_relative = 1e-15);
    }

    #[test]
    fn fum_weights_always_sum_to_one() {
        for (beta, t) in [(72.0, 1), (72.0, 7), (4.0, 100), (1.0, 3), (1e6, 250)] {
            let params = FumParams::with_beta(beta, t).unwrap();
            let sum: f64 = (0..t).map(|r| params.weight(r)).sum();
            assert_relative_eq!(sum, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn estimator_costs_exactly_three_fos() {
        let stream = scalar_stream(&[1.0, 2.0, 3.0]);
        let ledger = FoLedger::new();
        estimator(&stream, 3, 1, &v(&[0.0]), &v(&[0.5]), &v(&[-2.0]), &ledger).unwrap();
        assert_eq!(ledger.count(), 3);
    }

    #[test]
    fn estimator_with_cancelling_correction_is_the_prefix_gradient() {
        let stream = scalar_stream(&[1.0, -1.0, 4.0, 2.0]);
        let ledger = FoLedger::new();
        let anchor = v(&[0.25]);
        let i = 4;
        let agg = prefix_gradient(&stream, i - 1, &anchor, &ledger).unwrap();
        let expected = prefix_gradient(&stream, i, &anchor, &ledger).unwrap();
        for u in 1..i {
            let est = estimator(&stream, i, u, &anchor, &anchor, &agg, &ledger).unwrap();
            assert_relative_eq!(est, expected.clone(), max_relative = 1e-12);
        }
    }

    #[test]
    fn estimator_average_over_u_matches_direct_prefix_gradient() {
        // f_j(x) = (x - j)^2, i = 3, x_cur = 0, anchor = 0.5. Both u values
        // give -4 here, and so does ∇g_3(0) directly.
        let stream = scalar_stream(&[1.0, 2.0, 3.0]);
        let ledger = FoLedger::new();
        let x_cur = v(&[0.0]);
        let anchor = v(&[0.5]);
        let agg = prefix_gradient(&stream, 2, &anchor, &ledger).unwrap();
        assert_relative_eq!(agg[0], -2.0, max_relative = 1e-15);
        let mut mean = Vector::zeros(1);
        for u in 1..3 {
            let est = estimator(&stream, 3, u, &x_cur, &anchor, &agg, &ledger).unwrap();
            assert_relative_eq!(est[0], -4.0, max_relative = 1e-15);
            mean += est;
        }
        mean /= 2.0;
        let direct = prefix_gradient(&stream, 3, &x_cur, &ledger).unwrap();
        assert_relative_eq!(mean, direct, max_relative = 1e-15);
    }

    #[test]
    fn estimator_rejects_bad_indices() {
        let stream = scalar_stream(&[1.0, 2.0, 3.0]);
        let ledger = FoLedger::new();
        let x = v(&[0.0]);
        assert!(matches!(
            estimator(&stream, 1, 1, &x, &x, &x, &ledger),
            Err(Error::InvalidStage { .. })
        ));
        assert!(estimator(&stream, 3, 0, &x, &x, &x, &ledger).is_err());
        assert!(estimator(&stream, 3, 3, &x, &x, &x, &ledger).is_err());
        assert_eq!(ledger.count(), 0);
    }

    #[test]
    fn cheap_update_formula() {
        let out = aggregate_cheap_update(&v(&[2.0, 0.0]), &v(&[0.0, 4.0]), 4).unwrap();
        assert_relative_eq!(out, v(&[1.5, 1.0]), max_relative = 1e-15);

        let g = v(&[0.3, -0.7]);
        let same = aggregate_cheap_update(&g, &g, 9).unwrap();
        assert_relative_eq!(same, g, max_relative = 1e-15);

        assert!(aggregate_cheap_update(&g, &g, 1).is_err());
    }

    #[test]
    fn iterated_cheap_updates_match_the_brute_force_aggregate() {
        let stream = QuadraticStream::random(20, 3, 1.0, 0.7, 2.0, 5).unwrap();
        let anchor = v(&[0.2, -0.4, 0.1]);
        let ledger = FoLedger::new();
        // Start from the exact stage-4 aggregate at the anchor, then extend
        // stage by stage with cheap updates only.
        let mut agg = prefix_gradient(&stream, 4, &anchor, &ledger).unwrap();
        for i in 5..=20 {
            let grad_new = stream.gradient(i, &anchor, &ledger);
            agg = aggregate_cheap_update(&agg, &grad_new, i).unwrap();
            let direct = prefix_gradient(&stream, i, &anchor, &ledger).unwrap();
            assert_relative_eq!(&agg, &direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn theoretical_schedule_worked_example() {
        let (t, alpha) = theoretical_schedule(1.0, 1.0, 1.0, 1.0, 1).unwrap();
        assert_eq!(t, 720 + 9 + 864);
        assert_relative_eq!(alpha, 0.05, max_relative = 1e-12);
    }

    #[test]
    fn theoretical_budget_is_nonincreasing_in_the_stage() {
        let mut last = usize::MAX;
        for i in 1..=50 {
            let (t, _) = theoretical_schedule(0.5, 2.0, 3.0, 0.1, i).unwrap();
            assert!(t <= last, "T_{i} = {t} grew past {last}");
            last = t;
        }
    }

    #[test]
    fn theoretical_schedule_rejects_bad_inputs() {
        assert!(theoretical_schedule(0.0, 1.0, 1.0, 1.0, 1).is_err());
        assert!(theoretical_schedule(1.0, 0.5, 1.0, 1.0, 1).is_err());
        assert!(theoretical_schedule(1.0, 1.0, f64::INFINITY, 1.0, 1).is_err());
        assert!(theoretical_schedule(1.0, 1.0, 1.0, 0.0, 1).is_err());
        assert!(theoretical_schedule(1.0, 1.0, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn fum_contracts_on_a_stationary_stream() {
        // All components share the center, so the prefix optimum never moves
        // and the inner solver should make clear progress from a cold start.
        let stream = QuadraticStream::new(vec![v(&[0.6, -0.2]); 10], 0.5, 2.0).unwrap();
        let domain = Domain::ball(Vector::zeros(2), 2.0).unwrap();
        let ledger = FoLedger::new();
        let x_init = v(&[-1.0, 1.0]);
        let anchor = x_init.clone();
        let agg = prefix_gradient(&stream, 9, &anchor, &ledger).unwrap();
        let params = FumParams::new(1.0, 1.0, 40).unwrap();
        let mut rng = RngHandle::from_seed(3);
        let before = ledger.count();
        let out = fum_stage(
            &stream,
            &domain,
            10,
            9,
            &params,
            &StepMode::Theoretical,
            &x_init,
            &anchor,
            &agg,
            &mut rng,
            &ledger,
            &mut (),
        )
        .unwrap();
        assert_eq!(ledger.count() - before, 3 * 40, "inner solve must cost 3T FOs");
        let gap_out = stream.gap(10, &out).unwrap();
        let gap_init = stream.gap(10, &x_init).unwrap();
        assert!(
            gap_out < gap_init,
            "no progress: gap went from {gap_init} to {gap_out}"
        );
        assert!(domain.contains(&out, 1e-9));
    }

    #[test]
    fn run_skips_recompute_when_alpha_is_large() {
        // n = 2, alpha = 0.9: at stage 2, i - prev = 1 < 1.8, so the stage
        // must use the cheap update.
        let stream = scalar_stream(&[1.0, 2.0]);
        let domain = Domain::symmetric_box(1, 5.0).unwrap();
        let mut config = CsvrgConfig::practical(0.9, 5, 1.0, 7);
        config.step_mode = StepMode::Theoretical;
        let ledger = FoLedger::new();
        let run = csvrg_run(&stream, &domain, &config, &ledger).unwrap();
        assert!(run.recompute_stages.is_empty());
        assert_eq!(run.cheap_updates, 1);
    }

    #[test]
    fn recompute_events_respect_the_log_bound() {
        for (n, alpha) in [(10usize, 0.05), (10, 0.5), (100, 0.1), (100, 0.3), (400, 0.05)] {
            let stream = QuadraticStream::random(n, 2, 1.0, 0.5, 2.0, 13).unwrap();
            let domain = Domain::ball(Vector::zeros(2), 2.0).unwrap();
            let mut config = CsvrgConfig::practical(alpha, 2, 1.0, 1);
            config.step_mode = StepMode::Theoretical;
            let ledger = FoLedger::new();
            let run = csvrg_run(&stream, &domain, &config, &ledger).unwrap();
            let bound = ((n as f64).ln() / alpha).ceil() as usize;
            assert!(
                run.recompute_stages.len() <= bound,
                "n={n}, alpha={alpha}: {} recomputes exceed the bound {bound}",
                run.recompute_stages.len()
            );
        }
    }

    #[test]
    fn fo_ledger_matches_the_closed_form_decomposition() {
        let n = 60;
        let stream = QuadraticStream::random(n, 3, 1.0, 0.5, 2.0, 2).unwrap();
        let domain = Domain::ball(Vector::zeros(3), 2.0).unwrap();
        let mut config = CsvrgConfig::practical(0.3, 4, 1.0, 11);
        config.step_mode = StepMode::Theoretical;
        let ledger = FoLedger::new();
        let run = csvrg_run(&stream, &domain, &config, &ledger).unwrap();

        let fum_expected = 3 * 4 * (n as u64 - 1);
        let recompute_expected: u64 = run.recompute_stages.iter().map(|&i| (2 * i - 1) as u64).sum();
        let cheap_expected = (n as u64 - 1) - run.recompute_stages.len() as u64;
        assert_eq!(run.fum_fos, fum_expected);
        assert_eq!(run.recompute_fos, recompute_expected);
        assert_eq!(run.cheap_updates, cheap_expected);
        assert_eq!(
            run.total_fos,
            run.stage1_fos + fum_expected + recompute_expected + cheap_expected
        );
        assert_eq!(run.total_fos, ledger.count());
        // Cumulative per-stage counts must telescope to the same total.
        assert_eq!(run.outputs.last().unwrap().cum_fos, run.total_fos);
    }

    #[test]
    fn stage_outputs_track_a_moving_optimum() {
        // Practical-mode smoke test: with a generous budget the outputs
        // should stay close to the running mean of the centers.
        let stream = QuadraticStream::random(40, 2, 1.0, 0.5, 2.0, 19).unwrap();
        let domain = Domain::ball(Vector::zeros(2), 2.0).unwrap();
        let mut config = CsvrgConfig::practical(0.3, 60, 1.0, 5);
        config.step_mode = StepMode::Theoretical;
        let ledger = FoLedger::new();
        let run = csvrg_run(&stream, &domain, &config, &ledger).unwrap();
        for out in &run.outputs[4..] {
            let gap = stream.gap(out.stage, &out.x_hat).unwrap();
            assert!(gap < 0.05, "stage {}: gap {gap} too large", out.stage);
            assert!(domain.contains(&out.x_hat, 1e-9));
        }
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let stream = QuadraticStream::random(30, 2, 1.0, 0.5, 2.0, 23).unwrap();
        let domain = Domain::ball(Vector::zeros(2), 2.0).unwrap();
        let config = CsvrgConfig::practical(0.3, 10, 2.0, 77);
        let (l1, l2) = (FoLedger::new(), FoLedger::new());
        let a = csvrg_run(&stream, &domain, &config, &l1).unwrap();
        let b = csvrg_run(&stream, &domain, &config, &l2).unwrap();
        for (x, y) in a.outputs.iter().zip(&b.outputs) {
            assert_eq!(x.x_hat, y.x_hat);
            assert_eq!(x.cum_fos, y.cum_fos);
        }
        assert_eq!(a.recompute_stages, b.recompute_stages);
    }

    #[test]
    fn aggregate_matches_direct_sum_throughout_a_run() {
        // The stage-end aggregate must equal (1/i) Σ_{k≤i} ∇f_k(x̂_prev)
        // exactly, with x̂_prev the current anchor.
        struct Check<'a> {
            stream: &'a QuadraticStream,
            outputs: Vec<Vector>,
            worst: f64,
        }
        impl CsvrgObserver for Check<'_> {
            fn stage_done(&mut self, i: usize, x_hat: &Vector, agg: &Vector, prev: usize) {
                self.outputs.push(x_hat.clone());
                let anchor = &self.outputs[prev - 1];
                let shadow = FoLedger::new();
                let direct = prefix_gradient(self.stream, i, anchor, &shadow).unwrap();
                let denom = direct.norm().max(1.0);
                self.worst = self.worst.max((agg - direct).norm() / denom);
            }
        }
        let stream = QuadraticStream::random(50, 2, 1.0, 0.5, 2.0, 3).unwrap();
        let domain = Domain::ball(Vector::zeros(2), 2.0).unwrap();
        let mut config = CsvrgConfig::practical(0.3, 5, 1.0, 9);
        config.step_mode = StepMode::Theoretical;
        let ledger = FoLedger::new();
        let mut check = Check { stream: &stream, outputs: Vec::new(), worst: 0.0 };
        csvrg_run_observed(&stream, &domain, &config, &ledger, &mut check).unwrap();
        assert!(check.worst <= 1e-12, "aggregate drifted: {}", check.worst);
    }

    #[test]
    fn stage1_meets_its_accuracy_target() {
        let stream = scalar_stream(&[3.0, 1.0]);
        let domain = Domain::symmetric_box(1, 5.0).unwrap();
        let config = CsvrgConfig::practical(0.3, 3, 1.0, 1);
        let ledger = FoLedger::new();
        let run = csvrg_run(&stream, &domain, &config, &ledger).unwrap();
        let gap1 = stream.gap(1, &run.outputs[0].x_hat).unwrap();
        assert!(gap1 <= 1e-12, "stage-1 gap {gap1} above target");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(CsvrgConfig::practical(0.0, 5, 1.0, 0).validate().is_err());
        assert!(CsvrgConfig::practical(1.0, 5, 1.0, 0).validate().is_err());
        assert!(CsvrgConfig::practical(0.3, 0, 1.0, 0).validate().is_err());
        assert!(CsvrgConfig::practical(0.3, 5, 0.0, 0).validate().is_err());
        let config = CsvrgConfig {
            alpha: 0.3,
            schedule: Schedule::Custom { t_per_stage: vec![1, 1] },
            step_mode: StepMode::Theoretical,
            seed: 0,
            stage1_epsilon: 1e-9,
        };
        let stream = scalar_stream(&[1.0, 2.0, 3.0]);
        let domain = Domain::symmetric_box(1, 5.0).unwrap();
        let ledger = FoLedger::new();
        assert!(matches!(
            csvrg_run(&stream, &domain, &config, &ledger),
            Err(Error::InvalidConfig(_))
        ));
    }
}
