//! TOML experiment configuration.
//!
//! A config file has three tables: `[problem]` picks the instance,
//! `[methods.<name>]` tables select and tune solvers, `[run]` controls
//! seeding and output. Unknown keys are rejected everywhere so typos fail
//! loudly instead of silently running defaults.
//!
//! ```toml
//! [problem]
//! kind = "synthetic_ridge"
//! n = 2000
//! d = 20
//! lambda = 1e-3
//!
//! [methods.csvrg]
//! alpha = 0.3
//! t = 100
//!
//! [methods.sgd]      # no `t`: matched to CSVRG's FO budget
//!
//! [run]
//! runs = 10
//! root_seed = 0
//! output = "results.csv"
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::baselines::Sampling;
use crate::error::{Error, Result};
use crate::problems::SyntheticRidge;

/// Parsed experiment file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub methods: MethodsConfig,
    #[serde(default)]
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)
            .map_err(|e| Error::invalid_config(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.methods.in_canonical_order().is_empty() {
            return Err(Error::invalid_config("no methods configured"));
        }
        if self.run.runs == 0 {
            return Err(Error::invalid_config("run.runs must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Quadratic,
    SyntheticRidge,
    Libsvm,
}

/// The `[problem]` table. Fields are all optional at parse time; `validate`
/// enforces the ones the chosen kind requires and rejects the ones it does
/// not understand.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub seed: Option<u64>,
    /// Domain ball radius (defaults: quadratic 2.0, ridge 3.0). Also the
    /// radius over which the gradient bound is taken.
    pub radius: Option<f64>,
    // quadratic
    pub scale: Option<f64>,
    pub center_radius: Option<f64>,
    // ridge
    pub lambda: Option<f64>,
    pub row_scale: Option<f64>,
    pub alignment: Option<f64>,
    pub noise: Option<f64>,
    // libsvm
    pub path: Option<PathBuf>,
    pub standardize: Option<bool>,
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<()> {
        let mut set: BTreeSet<&str> = BTreeSet::new();
        macro_rules! note {
            ($($field:ident),*) => { $( if self.$field.is_some() { set.insert(stringify!($field)); } )* };
        }
        note!(n, d, seed, radius, scale, center_radius, lambda, row_scale, alignment, noise, path, standardize);
        let (allowed, required): (&[&str], &[&str]) = match self.kind {
            ProblemKind::Quadratic => {
                (&["n", "d", "seed", "radius", "scale", "center_radius"], &["n", "d"])
            }
            ProblemKind::SyntheticRidge => (
                &["n", "d", "seed", "radius", "lambda", "row_scale", "alignment", "noise"],
                &[],
            ),
            ProblemKind::Libsvm => (&["radius", "lambda", "path", "standardize"], &["path", "lambda"]),
        };
        for field in &set {
            if !allowed.contains(field) {
                return Err(Error::invalid_config(format!(
                    "problem field '{field}' does not apply to kind {:?}",
                    self.kind
                )));
            }
        }
        for field in required {
            if !set.contains(field) {
                return Err(Error::invalid_config(format!(
                    "problem kind {:?} requires field '{field}'",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    pub fn quadratic_params(&self) -> (usize, usize, u64, f64, f64, f64) {
        (
            self.n.unwrap_or(0),
            self.d.unwrap_or(0),
            self.seed.unwrap_or(0),
            self.center_radius.unwrap_or(1.0),
            self.scale.unwrap_or(0.5),
            self.radius.unwrap_or(2.0),
        )
    }

    pub fn ridge_spec(&self) -> SyntheticRidge {
        let base = SyntheticRidge::default();
        SyntheticRidge {
            n: self.n.unwrap_or(base.n),
            d: self.d.unwrap_or(base.d),
            lambda: self.lambda.unwrap_or(base.lambda),
            seed: self.seed.unwrap_or(base.seed),
            row_scale: self.row_scale.unwrap_or(base.row_scale),
            alignment: self.alignment.unwrap_or(base.alignment),
            noise: self.noise.unwrap_or(base.noise),
        }
    }

    pub fn ridge_radius(&self) -> f64 {
        self.radius.unwrap_or(3.0)
    }
}

/// The `[methods.*]` tables. Methods always execute in the field order
/// below, whatever order the file lists them in; CSVRG goes first so its
/// measured FO total can size the budget-matched SGD.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodsConfig {
    pub csvrg: Option<CsvrgSection>,
    pub sgd: Option<SgdSection>,
    pub sgd_sparse: Option<SgdSparseSection>,
    pub svrg: Option<VrSection>,
    pub katyusha: Option<VrSection>,
}

/// Canonical method order used everywhere (execution, CSV, FO reports).
pub const METHOD_ORDER: &[&str] = &["csvrg", "sgd", "sgd_sparse", "svrg", "katyusha"];

impl MethodsConfig {
    pub fn in_canonical_order(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        if self.csvrg.is_some() {
            names.push("csvrg");
        }
        if self.sgd.is_some() {
            names.push("sgd");
        }
        if self.sgd_sparse.is_some() {
            names.push("sgd_sparse");
        }
        if self.svrg.is_some() {
            names.push("svrg");
        }
        if self.katyusha.is_some() {
            names.push("katyusha");
        }
        names
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CsvrgSection {
    pub alpha: f64,
    pub t: usize,
    /// Base step for the practical schedule; defaults to `2 / mu` of the
    /// problem (equivalently `1 / lambda` on ridge).
    pub base_step: Option<f64>,
    pub stage1_epsilon: f64,
}

impl Default for CsvrgSection {
    fn default() -> Self {
        Self { alpha: 0.3, t: 100, base_step: None, stage1_epsilon: 1e-12 }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SamplingChoice {
    #[default]
    FullPrefix,
    ExcludeCurrent,
}

impl From<SamplingChoice> for Sampling {
    fn from(choice: SamplingChoice) -> Self {
        match choice {
            SamplingChoice::FullPrefix => Sampling::FullPrefix,
            SamplingChoice::ExcludeCurrent => Sampling::ExcludeCurrent,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgdSection {
    /// Step numerator (step at round t is `gamma / t`); defaults to `2 / mu`.
    pub gamma: Option<f64>,
    /// Steps per stage. Leave unset to match CSVRG's measured FO total,
    /// which requires CSVRG to be configured too.
    pub t: Option<usize>,
    pub sampling: SamplingChoice,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgdSparseSection {
    pub alpha: f64,
    pub t: usize,
    pub gamma: Option<f64>,
    pub sampling: SamplingChoice,
}

impl Default for SgdSparseSection {
    fn default() -> Self {
        Self { alpha: 0.002, t: 480, gamma: None, sampling: SamplingChoice::FullPrefix }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VrSection {
    pub outer: usize,
    pub inner: usize,
    /// Inner step size; defaults to `1 / (3 L)`.
    pub step: Option<f64>,
}

impl Default for VrSection {
    fn default() -> Self {
        Self { outer: 10, inner: 100, step: None }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub runs: usize,
    pub root_seed: u64,
    pub output: PathBuf,
    /// Measure wall-clock time. Off by default so repeated runs produce
    /// byte-identical CSV output.
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { runs: 10, root_seed: 0, output: PathBuf::from("results.csv"), timing: false }
    }
}
