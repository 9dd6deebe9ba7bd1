//! Comparison solvers: per-stage SGD with warm starts, its sparse-invocation
//! variant, and per-stage SVRG and Katyusha run from scratch on each prefix
//! objective.
//!
//! All solvers bill the shared [`FoLedger`] through the stream, so their FO
//! counts are measured, not estimated. Closed forms for the per-stage bills:
//! SGD costs `T` (one gradient per round), SVRG and Katyusha cost
//! `outer * (i + 2 * inner)` at stage `i` (a full prefix gradient per epoch
//! plus two component gradients per inner step).

use crate::core::{prefix_gradient, ComponentStream, Domain, FoLedger, RngHandle, Vector};
use crate::error::{Error, Result};

/// Component sampling rule for SGD rounds at stage `i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Sampling {
    /// `j ~ Unif{1..=i}`: every component of the objective being minimized,
    /// including the newest one. The default.
    #[default]
    FullPrefix,
    /// `j ~ Unif{1..=i-1}`: the newest component is never sampled. Kept for
    /// comparison runs; at stage 1, where the set would be empty, the single
    /// component is used.
    ExcludeCurrent,
}

impl Sampling {
    fn draw(self, i: usize, rng: &mut RngHandle) -> usize {
        match self {
            Sampling::FullPrefix => rng.uniform_index(1, i),
            Sampling::ExcludeCurrent => rng.uniform_index(1, (i - 1).max(1)),
        }
    }
}

/// One stage of projected SGD on the prefix objective `g_i`.
///
/// Performs `t` rounds `x <- proj(x - gamma/t_round * grad f_j(x))` with the
/// round index starting at 1, and returns the uniform average of the produced
/// iterates. Bills exactly `t` FOs.
#[allow(clippy::too_many_arguments)]
pub fn sgd_stage<S: ComponentStream>(
    stream: &S,
    domain: &Domain,
    i: usize,
    x_init: &Vector,
    gamma: f64,
    t: usize,
    rng: &mut RngHandle,
    ledger: &FoLedger,
    sampling: Sampling,
) -> Result<Vector> {
    if t < 1 {
        return Err(Error::invalid_config("sgd stage needs at least one round"));
    }
    if i == 0 || i > stream.stages() {
        return Err(Error::invalid_stage(i, format!("stream has {} stages", stream.stages())));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid_config(format!("step must be positive, got {gamma}")));
    }
    let mut x = domain.project(x_init)?;
    let mut average = Vector::zeros(x.len());
    for round in 1..=t {
        let j = sampling.draw(i, rng);
        let grad = stream.gradient(j, &x, ledger);
        x = domain.project(&(&x - grad * (gamma / round as f64)))?;
        average.axpy(1.0 / t as f64, &x, 1.0);
    }
    Ok(average)
}

/// Warm-started per-stage SGD: stage `i` starts from the previous output.
#[derive(Clone, Debug)]
pub struct SgdConfig {
    pub gamma: f64,
    /// Rounds per stage.
    pub t: usize,
    pub seed: u64,
    pub sampling: Sampling,
}

impl SgdConfig {
    pub fn new(gamma: f64, t: usize, seed: u64) -> Self {
        Self { gamma, t, seed, sampling: Sampling::FullPrefix }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::invalid_config("sgd step must be positive"));
        }
        if self.t < 1 {
            return Err(Error::invalid_config("sgd needs at least one round per stage"));
        }
        Ok(())
    }
}

/// Per-stage output of any baseline run.
#[derive(Clone, Debug)]
pub struct BaselineStage {
    pub stage: usize,
    pub x_hat: Vector,
    /// Ledger total right after this stage completed.
    pub cum_fos: u64,
    /// Whether the solver actually ran at this stage (always true except for
    /// skipped SGD-sparse stages).
    pub invoked: bool,
}

/// Run warm-started SGD over the whole stream: `x̂_i` is one [`sgd_stage`]
/// started from `x̂_{i-1}`, with `x̂_0 = proj(0)`.
pub fn sgd_run<S: ComponentStream>(
    stream: &S,
    domain: &Domain,
    config: &SgdConfig,
    ledger: &FoLedger,
) -> Result<Vec<BaselineStage>> {
    config.validate()?;
    let n = stream.stages();
    let mut x_hat = domain.project(&Vector::zeros(stream.dim()))?;
    let mut outputs = Vec::with_capacity(n);
    for i in 1..=n {
        let mut rng = RngHandle::stage_stream(config.seed, i);
        x_hat = sgd_stage(
            stream,
            domain,
            i,
            &x_hat,
            config.gamma,
            config.t,
            &mut rng,
            ledger,
            config.sampling,
        )?;
        outputs.push(BaselineStage {
            stage: i,
            x_hat: x_hat.clone(),
            cum_fos: ledger.count(),
            invoked: true,
        });
    }
    Ok(outputs)
}

/// Configuration of the sparse-invocation SGD variant.
#[derive(Clone, Debug)]
pub struct SgdSparseConfig {
    /// Skip threshold: SGD runs at stage `i` only while `prev * (1 + alpha) < i`.
    pub alpha: f64,
    /// Rounds per invoked stage.
    pub t: usize,
    pub gamma: f64,
    pub seed: u64,
    pub sampling: Sampling,
}

impl SgdSparseConfig {
    pub fn new(alpha: f64, t: usize, gamma: f64, seed: u64) -> Self {
        Self { alpha, t, gamma, seed, sampling: Sampling::FullPrefix }
    }

    /// Accuracy-driven threshold `alpha = epsilon / (2 |D| G)`, which caps
    /// invocations at `4 |D| G ln(n) / epsilon`. Needs a bounded domain and a
    /// finite gradient bound.
    pub fn theoretical(
        domain: &Domain,
        g: f64,
        epsilon: f64,
        t: usize,
        gamma: f64,
        seed: u64,
    ) -> Result<Self> {
        let diameter = domain.diameter();
        if !diameter.is_finite() {
            return Err(Error::invalid_config(
                "the accuracy-driven threshold needs a bounded domain",
            ));
        }
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::invalid_config("finite positive gradient bound required"));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid_config("epsilon must be positive"));
        }
        Ok(Self::new(epsilon / (2.0 * diameter * g), t, gamma, seed))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid_config("sparse threshold alpha must be positive"));
        }
        if self.t < 1 {
            return Err(Error::invalid_config("sgd-sparse needs at least one round per stage"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::invalid_config("sgd-sparse step must be positive"));
        }
        Ok(())
    }
}

/// Result of [`sgd_sparse_run`].
#[derive(Clone, Debug)]
pub struct SgdSparseRun {
    pub stages: Vec<BaselineStage>,
    /// Stages where SGD actually ran; consecutive entries `i1 < i2` satisfy
    /// `i2 > i1 * (1 + alpha)`, so there are at most `O(log(n)/alpha)` of them.
    pub invocation_stages: Vec<usize>,
    pub total_fos: u64,
}

/// Sparse-invocation SGD: run [`sgd_stage`] only while `prev * (1 + alpha) < i`,
/// where `prev` is the last invoked stage (initially 0); every other stage
/// republishes the previous output at zero FO cost.
pub fn sgd_sparse_run<S: ComponentStream>(
    stream: &S,
    domain: &Domain,
    config: &SgdSparseConfig,
    ledger: &FoLedger,
) -> Result<SgdSparseRun> {
    config.validate()?;
    let n = stream.stages();
    let mut x_hat = domain.project(&Vector::zeros(stream.dim()))?;
    let mut prev = 0usize;
    let mut stages = Vec::with_capacity(n);
    let mut invocation_stages = Vec::new();
    for i in 1..=n {
        let invoked = (prev as f64) * (1.0 + config.alpha) < i as f64;
        if invoked {
            let mut rng = RngHandle::stage_stream(config.seed, i);
            x_hat = sgd_stage(
                stream,
                domain,
                i,
                &x_hat,
                config.gamma,
                config.t,
                &mut rng,
                ledger,
                config.sampling,
            )?;
            prev = i;
            invocation_stages.push(i);
        }
        stages.push(BaselineStage {
            stage: i,
            x_hat: x_hat.clone(),
            cum_fos: ledger.count(),
            invoked,
        });
    }
    Ok(SgdSparseRun { stages, invocation_stages, total_fos: ledger.count() })
}

/// Epoch budget shared by SVRG and Katyusha.
#[derive(Clone, Copy, Debug)]
pub struct VrConfig {
    /// Outer epochs; each recomputes the full prefix gradient.
    pub outer: usize,
    /// Stochastic steps per epoch.
    pub inner: usize,
    /// Step size; `1/(3L)` is the standard choice.
    pub step: f64,
}

impl VrConfig {
    pub fn new(outer: usize, inner: usize, step: f64) -> Self {
        Self { outer, inner, step }
    }

    pub fn validate(&self) -> Result<()> {
        if self.outer < 1 || self.inner < 1 {
            return Err(Error::invalid_config(format!(
                "variance-reduced solvers need outer >= 1 and inner >= 1, got {} and {}",
                self.outer, self.inner
            )));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::invalid_config(format!("step must be positive, got {}", self.step)));
        }
        Ok(())
    }
}

/// Snapshot recorded after each outer epoch of a variance-reduced solve.
#[derive(Clone, Debug)]
pub struct EpochRecord {
    pub epoch: usize,
    pub cum_fos: u64,
    pub snapshot: Vector,
}

/// Momentum coefficients of the shared inner loop. `(0, 0)` is plain SVRG;
/// Katyusha uses `tau2 = 1/2` and `tau1 = min(sqrt(inner * mu * step), 1/2)`.
#[derive(Clone, Copy, Debug)]
struct Momentum {
    tau1: f64,
    tau2: f64,
}

/// Shared SVRG/Katyusha epoch loop on the prefix objective `g_i`.
///
/// Each epoch computes the full prefix gradient at the snapshot (`i` FOs) and
/// then runs `inner` stochastic steps with the control-variate estimator
/// `∇f_j(w) - ∇f_j(snapshot) + fullgrad` (2 FOs each, `j ~ Unif{1..=i}`).
/// With momentum, the query point is `w = tau1 z + tau2 snapshot +
/// (1 - tau1 - tau2) y` where `z` takes the longer mirror step `step/tau1`
/// and `y` the plain gradient step; with `tau1 = tau2 = 0` the loop is
/// exactly SVRG (`w = y`, no mirror sequence). The snapshot for the next
/// epoch is the last inner iterate, and the final snapshot is returned.
fn vr_epochs<S: ComponentStream>(
    stream: &S,
    domain: &Domain,
    i: usize,
    x_init: &Vector,
    config: &VrConfig,
    momentum: Momentum,
    rng: &mut RngHandle,
    ledger: &FoLedger,
    mut trace: Option<&mut Vec<EpochRecord>>,
) -> Result<Vector> {
    config.validate()?;
    if i == 0 || i > stream.stages() {
        return Err(Error::invalid_stage(i, format!("stream has {} stages", stream.stages())));
    }
    let Momentum { tau1, tau2 } = momentum;
    let mut snapshot = domain.project(x_init)?;
    let mut y = snapshot.clone();
    let mut z = snapshot.clone();
    for epoch in 0..config.outer {
        let full = prefix_gradient(stream, i, &snapshot, ledger)?;
        for _ in 0..config.inner {
            let w = if tau1 == 0.0 && tau2 == 0.0 {
                y.clone()
            } else {
                &z * tau1 + &snapshot * tau2 + &y * (1.0 - tau1 - tau2)
            };
            let j = rng.uniform_index(1, i);
            let est = stream.gradient(j, &w, ledger) - stream.gradient(j, &snapshot, ledger) + &full;
            if tau1 > 0.0 {
                z = domain.project(&(&z - &est * (config.step / tau1)))?;
            }
            y = domain.project(&(&w - &est * config.step))?;
        }
        snapshot = y.clone();
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(EpochRecord { epoch, cum_fos: ledger.count(), snapshot: snapshot.clone() });
        }
    }
    Ok(snapshot)
}

/// SVRG on the prefix objective `g_i`, started from `x_init`. Returns the
/// final snapshot; bills `outer * (i + 2 * inner)` FOs.
pub fn svrg_stage<S: ComponentStream>(
    stream: &S,
    domain: &Domain,
    i: usize,
    x_init: &Vector,
    config: &VrConfig,
    rng: &mut RngHandle,
    ledger: &FoLedger,
) -> Result<Vector> {
    vr_epochs(stream, domain, i, x_init, config, Momentum { tau1: 0.0, tau2: 0.0 }, rng, ledger, None)
}

/// [`svrg_stage`] with per-epoch snapshots for convergence inspection.
pub fn svrg_stage_traced<S: ComponentStream>(
    stream: &S,
    domain: &Domain,
    i: usize,
    x_init: &Vector,
    config: &VrConfig,
    rng: &mut RngHandle,
    ledger: &FoLedger,
) -> Result<Vec<EpochRecord>> {
    let mut trace = Vec::with_capacity(config.outer);
    vr_epochs(
        stream,
        domain,
        i,
        x_init,
        config,
        Momentum { tau1: 0.0, tau2: 0.0 },
        rng,
        ledger,
        Some(&mut trace),
    )?;
    Ok(trace)
}

fn katyusha_momentum<S: ComponentStream>(stream: &S, config: &VrConfig) -> Momentum {
    let c = stream.constants();
    let tau1 = (config.inner as f64 * c.mu * config.step).sqrt().min(0.5);
    Momentum { tau1, tau2: 0.5 }
}

/// Katyusha (negative-momentum accelerated SVRG, strongly convex variant) on
/// the prefix objective `g_i`. Same FO bill as [`svrg_stage`]. The momentum
/// weight `tau1 = min(sqrt(inner * mu * step), 1/2)` reduces to the textbook
/// `sqrt(inner * mu / (3L))` at the default step `1/(3L)`.
pub fn katyusha_stage<S: ComponentStream>(
    stream: &S,
    domain: &Domain,
    i: usize,
    x_init: &Vector,
    config: &VrConfig,
    rng: &mut RngHandle,
    ledger: &FoLedger,
) -> Result<Vector> {
    let momentum = katyusha_momentum(stream, config);
    vr_epochs(stream, domain, i, x_init, config, momentum, rng, ledger, None)
}

/// [`katyusha_stage`] with per-epoch snapshots.
pub fn katyusha_stage_traced<S: ComponentStream>(
    stream: &S,
    domain: &Domain,
    i: usize,
    x_init: &Vector,
    config: &VrConfig,
    rng: &mut RngHandle,
    ledger: &FoLedger,
) -> Result<Vec<EpochRecord>> {
    let momentum = katyusha_momentum(stream, config);
    let mut trace = Vec::with_capacity(config.outer);
    vr_epochs(stream, domain, i, x_init, config, momentum, rng, ledger, Some(&mut trace))?;
    Ok(trace)
}

/// Which variance-reduced solver a per-stage run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VrMethod {
    Svrg,
    Katyusha,
}

/// Run a variance-reduced solver independently at every stage, restarting
/// from `proj(0)` each time (the solver gets no warm start; it must buy all
/// of its accuracy with per-stage FOs, which is the point of the comparison).
pub fn vr_run<S: ComponentStream>(
    stream: &S,
    domain: &Domain,
    method: VrMethod,
    config: &VrConfig,
    seed: u64,
    ledger: &FoLedger,
) -> Result<Vec<BaselineStage>> {
    config.validate()?;
    let n = stream.stages();
    let start = domain.project(&Vector::zeros(stream.dim()))?;
    let mut outputs = Vec::with_capacity(n);
    for i in 1..=n {
        let mut rng = RngHandle::stage_stream(seed, i);
        let x_hat = match method {
            VrMethod::Svrg => svrg_stage(stream, domain, i, &start, config, &mut rng, ledger)?,
            VrMethod::Katyusha => {
                katyusha_stage(stream, domain, i, &start, config, &mut rng, ledger)?
            }
        };
        outputs.push(BaselineStage { stage: i, x_hat, cum_fos: ledger.count(), invoked: true });
    }
    Ok(outputs)
}
