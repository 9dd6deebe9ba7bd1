//! Experiment driver: build the problem, run every configured method over
//! all seeds, aggregate per-stage gap and FO statistics.
//!
//! Seeds are `root_seed + r` for run index `r` and fan out across a rayon
//! pool (capped by the `CFSM_THREADS` environment variable when set). A seed
//! whose run produces a non-finite gap, or a gap below the `-1e-10` floor
//! that the exact optimum oracles guarantee, is excluded from the aggregates
//! with a warning on stderr; the experiment only fails if every seed does.

use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{
    sgd_run, sgd_sparse_run, vr_run, SgdConfig, SgdSparseConfig, VrConfig, VrMethod,
};
use crate::core::{ComponentStream, Constants, Domain, FoLedger, Vector};
use crate::csvrg::{csvrg_run, CsvrgConfig};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, MethodsConfig, ProblemConfig, ProblemKind, RunConfig};
use crate::problems::{parse_libsvm, standardize_features, QuadraticStream, RidgeExact, RidgeStream};

/// The stream the experiment runs on, with exact-gap support per kind.
pub enum ProblemInstance {
    Quadratic(QuadraticStream),
    Ridge(RidgeStream),
}

impl ProblemInstance {
    pub fn stages(&self) -> usize {
        match self {
            ProblemInstance::Quadratic(s) => s.stages(),
            ProblemInstance::Ridge(s) => s.stages(),
        }
    }

    pub fn constants(&self) -> Constants {
        match self {
            ProblemInstance::Quadratic(s) => s.constants(),
            ProblemInstance::Ridge(s) => s.constants(),
        }
    }
}

pub struct BuiltProblem {
    pub instance: ProblemInstance,
    pub domain: Domain,
}

pub fn build_problem(config: &ProblemConfig) -> Result<BuiltProblem> {
    config.validate()?;
    match config.kind {
        ProblemKind::Quadratic => {
            let (n, d, seed, center_radius, scale, radius) = config.quadratic_params();
            let stream = QuadraticStream::random(n, d, center_radius, scale, radius, seed)?;
            let domain = Domain::ball(Vector::zeros(d), radius)?;
            Ok(BuiltProblem { instance: ProblemInstance::Quadratic(stream), domain })
        }
        ProblemKind::SyntheticRidge => {
            let spec = config.ridge_spec();
            let radius = config.ridge_radius();
            let stream = spec.generate()?.with_gradient_radius(radius)?;
            let domain = Domain::ball(Vector::zeros(spec.d), radius)?;
            Ok(BuiltProblem { instance: ProblemInstance::Ridge(stream), domain })
        }
        ProblemKind::Libsvm => {
            let path = config.path.as_ref().expect("checked by validate");
            let (mut rows, d) = parse_libsvm(path)?;
            if config.standardize.unwrap_or(false) {
                standardize_features(&mut rows);
            }
            let lambda = config.lambda.expect("checked by validate");
            let radius = config.ridge_radius();
            let stream = RidgeStream::new(rows, lambda)?.with_gradient_radius(radius)?;
            let domain = Domain::ball(Vector::zeros(d), radius)?;
            Ok(BuiltProblem { instance: ProblemInstance::Ridge(stream), domain })
        }
    }
}

/// Per-stage statistics over the surviving seeds.
#[derive(Clone, Debug)]
pub struct StageRow {
    pub stage: usize,
    pub gap_mean: f64,
    pub gap_std: f64,
    pub cum_fos_mean: f64,
    pub wall_ms_mean: f64,
}

#[derive(Clone, Debug)]
pub struct MethodOutcome {
    pub method: String,
    pub rows: Vec<StageRow>,
    /// Total FOs of one run (identical across seeds: every schedule here is
    /// data-independent).
    pub total_fos: u64,
    pub used_runs: usize,
    pub excluded: Vec<(u64, String)>,
}

/// How closely the auto-sized SGD budget matched CSVRG's measured total.
#[derive(Clone, Copy, Debug)]
pub struct SgdParity {
    pub csvrg_total: u64,
    pub sgd_per_stage: usize,
    pub relative_error: f64,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub methods: Vec<MethodOutcome>,
    pub sgd_parity: Option<SgdParity>,
}

impl ExperimentOutcome {
    pub fn method(&self, name: &str) -> Option<&MethodOutcome> {
        self.methods.iter().find(|m| m.method == name)
    }
}

#[derive(Clone, Debug)]
enum ResolvedMethod {
    Csvrg(CsvrgConfig),
    Sgd(SgdConfig),
    SgdSparse(SgdSparseConfig),
    Vr(VrMethod, VrConfig),
}

fn resolve_method(
    name: &str,
    methods: &MethodsConfig,
    constants: Constants,
    n: usize,
    prior: &[MethodOutcome],
    parity: &mut Option<SgdParity>,
) -> Result<ResolvedMethod> {
    // One default step scale everywhere: 2 / mu, which on ridge problems is
    // exactly 1 / lambda.
    let default_gamma = 2.0 / constants.mu;
    match name {
        "csvrg" => {
            let s = methods.csvrg.as_ref().expect("selected from config");
            let mut config =
                CsvrgConfig::practical(s.alpha, s.t, s.base_step.unwrap_or(default_gamma), 0);
            config.stage1_epsilon = s.stage1_epsilon;
            config.validate()?;
            Ok(ResolvedMethod::Csvrg(config))
        }
        "sgd" => {
            let s = methods.sgd.as_ref().expect("selected from config");
            let t = match s.t {
                Some(t) => t,
                None => {
                    let csvrg = prior.iter().find(|o| o.method == "csvrg").ok_or_else(|| {
                        Error::invalid_config(
                            "sgd without an explicit t is FO-matched to csvrg, \
                             which must be configured too",
                        )
                    })?;
                    let t = ((csvrg.total_fos as f64 / n as f64).round() as usize).max(1);
                    *parity = Some(SgdParity {
                        csvrg_total: csvrg.total_fos,
                        sgd_per_stage: t,
                        relative_error: ((t * n) as f64 - csvrg.total_fos as f64).abs()
                            / csvrg.total_fos as f64,
                    });
                    t
                }
            };
            let config = SgdConfig {
                gamma: s.gamma.unwrap_or(default_gamma),
                t,
                seed: 0,
                sampling: s.sampling.into(),
            };
            config.validate()?;
            Ok(ResolvedMethod::Sgd(config))
        }
        "sgd_sparse" => {
            let s = methods.sgd_sparse.as_ref().expect("selected from config");
            let config = SgdSparseConfig {
                alpha: s.alpha,
                t: s.t,
                gamma: s.gamma.unwrap_or(default_gamma),
                seed: 0,
                sampling: s.sampling.into(),
            };
            config.validate()?;
            Ok(ResolvedMethod::SgdSparse(config))
        }
        "svrg" | "katyusha" => {
            let s = if name == "svrg" { &methods.svrg } else { &methods.katyusha };
            let s = s.as_ref().expect("selected from config");
            let config =
                VrConfig::new(s.outer, s.inner, s.step.unwrap_or(1.0 / (3.0 * constants.l)));
            config.validate()?;
            let method = if name == "svrg" { VrMethod::Svrg } else { VrMethod::Katyusha };
            Ok(ResolvedMethod::Vr(method, config))
        }
        other => Err(Error::invalid_config(format!("unknown method '{other}'"))),
    }
}

/// One seed's trajectory: stage outputs reduced to gap and cumulative FOs.
struct SeedSeries {
    stages: Vec<usize>,
    gaps: Vec<f64>,
    cum_fos: Vec<u64>,
    wall_ms: Vec<f64>,
}

fn run_stream<S: ComponentStream>(
    stream: &S,
    domain: &Domain,
    method: &ResolvedMethod,
    seed: u64,
) -> Result<Vec<(usize, Vector, u64)>> {
    let ledger = FoLedger::new();
    match method {
        ResolvedMethod::Csvrg(base) => {
            let mut config = base.clone();
            config.seed = seed;
            let run = csvrg_run(stream, domain, &config, &ledger)?;
            Ok(run.outputs.into_iter().map(|o| (o.stage, o.x_hat, o.cum_fos)).collect())
        }
        ResolvedMethod::Sgd(base) => {
            let mut config = base.clone();
            config.seed = seed;
            let stages = sgd_run(stream, domain, &config, &ledger)?;
            Ok(stages.into_iter().map(|s| (s.stage, s.x_hat, s.cum_fos)).collect())
        }
        ResolvedMethod::SgdSparse(base) => {
            let mut config = base.clone();
            config.seed = seed;
            let run = sgd_sparse_run(stream, domain, &config, &ledger)?;
            Ok(run.stages.into_iter().map(|s| (s.stage, s.x_hat, s.cum_fos)).collect())
        }
        ResolvedMethod::Vr(vr, config) => {
            let stages = vr_run(stream, domain, *vr, config, seed, &ledger)?;
            Ok(stages.into_iter().map(|s| (s.stage, s.x_hat, s.cum_fos)).collect())
        }
    }
}

fn gap_series(instance: &ProblemInstance, outputs: &[(usize, Vector, u64)]) -> Result<Vec<f64>> {
    match instance {
        ProblemInstance::Quadratic(q) => outputs.iter().map(|(i, x, _)| q.gap(*i, x)).collect(),
        ProblemInstance::Ridge(r) => {
            let mut exact = RidgeExact::new(r);
            let mut gaps = Vec::with_capacity(outputs.len());
            for (i, x, _) in outputs {
                while exact.stage() < *i {
                    exact.advance(r)?;
                }
                gaps.push(exact.gap(x));
            }
            Ok(gaps)
        }
    }
}

fn validate_gaps(gaps: &[f64], seed: u64) -> Result<()> {
    for (idx, gap) in gaps.iter().enumerate() {
        if !gap.is_finite() {
            return Err(Error::numeric(format!(
                "seed {seed}: non-finite gap at stage {}",
                idx + 1
            )));
        }
        if *gap < -1e-10 {
            return Err(Error::numeric(format!(
                "seed {seed}: gap {gap:.3e} at stage {} is below the exactness floor",
                idx + 1
            )));
        }
    }
    Ok(())
}

fn run_seed(
    problem: &BuiltProblem,
    method: &ResolvedMethod,
    seed: u64,
    timing: bool,
) -> Result<SeedSeries> {
    let start = Instant::now();
    let outputs = match &problem.instance {
        ProblemInstance::Quadratic(s) => run_stream(s, &problem.domain, method, seed)?,
        ProblemInstance::Ridge(s) => run_stream(s, &problem.domain, method, seed)?,
    };
    let elapsed_ms = if timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    let gaps = gap_series(&problem.instance, &outputs)?;
    validate_gaps(&gaps, seed)?;
    let total_fos = outputs.last().map_or(1, |o| o.2.max(1));
    Ok(SeedSeries {
        stages: outputs.iter().map(|o| o.0).collect(),
        cum_fos: outputs.iter().map(|o| o.2).collect(),
        // Attribute the run's wall clock to stages in proportion to FOs
        // spent; per-stage timers would distort the cheap stages.
        wall_ms: outputs
            .iter()
            .map(|o| if timing { elapsed_ms * o.2 as f64 / total_fos as f64 } else { 0.0 })
            .collect(),
        gaps,
    })
}

fn aggregate(series: &[SeedSeries]) -> Vec<StageRow> {
    let stages = series[0].stages.len();
    let k = series.len() as f64;
    (0..stages)
        .map(|idx| {
            let gap_mean = series.iter().map(|s| s.gaps[idx]).sum::<f64>() / k;
            let gap_var = if series.len() > 1 {
                series.iter().map(|s| (s.gaps[idx] - gap_mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            StageRow {
                stage: series[0].stages[idx],
                gap_mean,
                gap_std: gap_var.sqrt(),
                cum_fos_mean: series.iter().map(|s| s.cum_fos[idx] as f64).sum::<f64>() / k,
                wall_ms_mean: series.iter().map(|s| s.wall_ms[idx]).sum::<f64>() / k,
            }
        })
        .collect()
}

fn run_method(
    name: &str,
    problem: &BuiltProblem,
    method: &ResolvedMethod,
    run: &RunConfig,
) -> Result<MethodOutcome> {
    let seeds: Vec<u64> = (0..run.runs).map(|r| run.root_seed.wrapping_add(r as u64)).collect();
    let results: Vec<(u64, Result<SeedSeries>)> = seeds
        .par_iter()
        .map(|&seed| (seed, run_seed(problem, method, seed, run.timing)))
        .collect();
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (seed, result) in results {
        match result {
            Ok(series) => kept.push(series),
            Err(e) => {
                eprintln!("warning: excluding {name} seed {seed}: {e}");
                excluded.push((seed, e.to_string()));
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::numeric(format!(
            "{name}: every seed failed; first error: {}",
            excluded[0].1
        )));
    }
    let total_fos = *kept[0].cum_fos.last().expect("streams have at least one stage");
    Ok(MethodOutcome {
        method: name.to_string(),
        rows: aggregate(&kept),
        total_fos,
        used_runs: kept.len(),
        excluded,
    })
}

fn thread_cap() -> Option<usize> {
    let raw = std::env::var("CFSM_THREADS").ok()?;
    match raw.trim().parse::<usize>() {
        Ok(0) => None,
        Ok(k) => Some(k),
        Err(_) => {
            eprintln!("warning: ignoring unparseable CFSM_THREADS={raw:?}");
            None
        }
    }
}

/// Run the full experiment described by `config` and return aggregated
/// results, methods in canonical order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let problem = build_problem(&config.problem)?;
    match thread_cap() {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::invalid_config(format!("CFSM_THREADS thread pool: {e}")))?
            .install(|| run_experiment_inner(config, &problem)),
        None => run_experiment_inner(config, &problem),
    }
}

fn run_experiment_inner(
    config: &ExperimentConfig,
    problem: &BuiltProblem,
) -> Result<ExperimentOutcome> {
    let constants = problem.instance.constants();
    let n = problem.instance.stages();
    let mut methods: Vec<MethodOutcome> = Vec::new();
    let mut parity = None;
    for name in config.methods.in_canonical_order() {
        let resolved =
            resolve_method(name, &config.methods, constants, n, &methods, &mut parity)?;
        methods.push(run_method(name, problem, &resolved, &config.run)?);
    }
    Ok(ExperimentOutcome { methods, sgd_parity: parity })
}
