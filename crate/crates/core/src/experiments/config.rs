//! Flat TOML experiment configuration.
//!
//! ```toml
//! schema_version = 1
//! experiment = "bias-sweep"
//! dataset = "synthetic:regression"   # or a path to a CSV / LIBSVM file
//! lambda = 10.0
//! m = 50
//! q_grid = [1, 2, 4, 8]
//! trials = 20
//! seed = 7
//! ```
//!
//! Every key is optional except `schema_version`; unset keys take the
//! defaults of the chosen experiment. Unknown keys are rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::distributed::{AveragingScheme, SketchChoice, Solver};
use crate::error::{Error, Result};
use crate::experiments::dataset::{self, DataFormat, Dataset, Preprocessing};
use crate::experiments::report::{ExperimentReport, OutputFormat};
use crate::rng;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    EffectiveDim,
    BiasSweep,
    AveragingComparison,
    Convergence,
    LambdaPrimeSweep,
    DppCheck,
    Concentration,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::EffectiveDim,
        Experiment::BiasSweep,
        Experiment::AveragingComparison,
        Experiment::Convergence,
        Experiment::LambdaPrimeSweep,
        Experiment::DppCheck,
        Experiment::Concentration,
    ];

    /// Subcommand name.
    pub fn name(self) -> &'static str {
        match self {
            Experiment::EffectiveDim => "effective-dim",
            Experiment::BiasSweep => "bias-sweep",
            Experiment::AveragingComparison => "avg-compare",
            Experiment::Convergence => "converge",
            Experiment::LambdaPrimeSweep => "lp-sweep",
            Experiment::DppCheck => "dpp-check",
            Experiment::Concentration => "concentration",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s || e.name().replace('-', "_") == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossChoice {
    Quadratic,
    Logistic,
    LogBarrier,
}

impl LossChoice {
    pub fn name(self) -> &'static str {
        match self {
            LossChoice::Quadratic => "quadratic",
            LossChoice::Logistic => "logistic",
            LossChoice::LogBarrier => "log_barrier",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(LossChoice::Quadratic),
            "logistic" => Ok(LossChoice::Logistic),
            "log_barrier" | "log-barrier" => Ok(LossChoice::LogBarrier),
            other => Err(Error::Config(format!("unknown loss `{other}`"))),
        }
    }
}

/// Raw file contents; every field but the version is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub experiment: Option<String>,
    pub dataset: Option<String>,
    pub data_format: Option<String>,
    pub preprocessing: Option<String>,
    pub data_seed: Option<u64>,
    pub loss: Option<String>,
    pub solver: Option<String>,
    pub sketches: Option<Vec<String>>,
    pub averaging: Option<String>,
    pub lambda: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub lambda_prime_grid: Option<Vec<f64>>,
    pub m: Option<usize>,
    pub m_grid: Option<Vec<usize>>,
    pub q: Option<usize>,
    pub q_grid: Option<Vec<usize>>,
    pub t_max: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub draws: Option<usize>,
    pub barrier_t: Option<f64>,
    pub fresh_sketches: Option<bool>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub threads: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// `synthetic:<name>` or a file path.
    pub dataset: String,
    pub data_format: DataFormat,
    pub preprocessing: Preprocessing,
    pub data_seed: u64,
    pub loss: LossChoice,
    pub solver: Solver,
    pub sketches: Vec<SketchChoice>,
    pub averaging: AveragingScheme,
    pub lambda: f64,
    pub lambda_grid: Vec<f64>,
    pub lambda_prime_grid: Vec<f64>,
    pub m: usize,
    pub m_grid: Vec<usize>,
    pub q: usize,
    pub q_grid: Vec<usize>,
    pub t_max: usize,
    pub trials: usize,
    pub seed: u64,
    /// Explicit per-trial seeds; when empty they are derived from `seed`.
    pub seeds: Vec<u64>,
    pub draws: usize,
    pub barrier_t: f64,
    pub fresh_sketches: bool,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub threads: Option<usize>,
}

fn powers_of_two(max: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |q| Some(q * 2)).take_while(|q| *q <= max).collect()
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let mut c = Self {
            experiment,
            dataset: "synthetic:regression".into(),
            data_format: DataFormat::Csv,
            preprocessing: Preprocessing::StandardizeColumns,
            data_seed: 0,
            loss: LossChoice::Quadratic,
            solver: Solver::DistIhs,
            sketches: vec![SketchChoice::Surrogate],
            averaging: AveragingScheme::Uniform,
            lambda: 10.0,
            lambda_grid: vec![10.0],
            lambda_prime_grid: vec![],
            m: 50,
            m_grid: vec![50],
            q: 10,
            q_grid: powers_of_two(1024),
            t_max: 10,
            trials: 20,
            seed: 0,
            seeds: vec![],
            draws: 100_000,
            barrier_t: 4.0,
            fresh_sketches: true,
            out: None,
            format: OutputFormat::Csv,
            threads: None,
        };
        match experiment {
            Experiment::EffectiveDim => {
                c.dataset = "synthetic:boston_like".into();
                c.preprocessing = Preprocessing::None;
                c.lambda_grid = vec![1.0, 10.0, 100.0];
                c.m_grid = vec![20, 50, 100];
            }
            Experiment::BiasSweep => {
                c.sketches = vec![SketchChoice::Surrogate, SketchChoice::Gaussian, SketchChoice::Uniform];
                c.m = 20;
            }
            Experiment::AveragingComparison => {
                c.m_grid = vec![20, 50, 100];
                c.q_grid = powers_of_two(256);
                c.trials = 100;
            }
            Experiment::Convergence => {
                c.dataset = "synthetic:logistic".into();
                c.loss = LossChoice::Logistic;
                c.solver = Solver::DistNewtonSketch;
                c.lambda = 1e-4;
                c.m = 50;
                c.q = 100;
                c.t_max = 15;
            }
            Experiment::LambdaPrimeSweep => {
                c.m = 20;
                c.lambda_prime_grid = (1..=10).map(f64::from).collect();
                c.q_grid = powers_of_two(256);
                c.trials = 25;
            }
            Experiment::DppCheck => {
                c.sketches = vec![];
            }
            Experiment::Concentration => {
                c.m = 50;
                c.q_grid = vec![4, 8, 16, 32];
                c.trials = 50;
            }
        }
        c
    }

    /// Defaults for the file's experiment (or `fallback`), overridden by
    /// the file's keys.
    pub fn from_file(file: &ConfigFile, fallback: Option<Experiment>) -> Result<Self> {
        let experiment = match (&file.experiment, fallback) {
            (Some(e), Some(f)) => {
                let parsed = Experiment::parse(e)?;
                if parsed != f {
                    return Err(Error::Config(format!(
                        "config file is for `{}` but the command is `{}`",
                        parsed.name(),
                        f.name()
                    )));
                }
                parsed
            }
            (Some(e), None) => Experiment::parse(e)?,
            (None, Some(f)) => f,
            (None, None) => return Err(Error::Config("no experiment given".into())),
        };
        let mut c = Self::defaults(experiment);
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &file.$field {
                    c.$field = v.clone();
                }
            };
        }
        set!(dataset);
        set!(data_seed);
        set!(lambda);
        set!(lambda_grid);
        set!(lambda_prime_grid);
        set!(m);
        set!(m_grid);
        set!(q);
        set!(q_grid);
        set!(t_max);
        set!(trials);
        set!(seed);
        set!(seeds);
        set!(draws);
        set!(barrier_t);
        set!(fresh_sketches);
        if file.threads.is_some() {
            c.threads = file.threads;
        }
        if let Some(p) = &file.out {
            c.out = Some(p.clone());
        }
        if let Some(s) = &file.data_format {
            c.data_format = DataFormat::parse(s)?;
        }
        if let Some(s) = &file.preprocessing {
            c.preprocessing = Preprocessing::parse(s)?;
        }
        if let Some(s) = &file.loss {
            c.loss = LossChoice::parse(s)?;
        }
        if let Some(s) = &file.solver {
            c.solver = match s.as_str() {
                "ihs" | "dist_ihs" => Solver::DistIhs,
                "newton_sketch" | "dist_newton_sketch" => Solver::DistNewtonSketch,
                other => return Err(Error::Config(format!("unknown solver `{other}`"))),
            };
        }
        if let Some(list) = &file.sketches {
            c.sketches = list.iter().map(|s| SketchChoice::parse(s)).collect::<Result<_>>()?;
        }
        if let Some(s) = &file.averaging {
            c.averaging = match s.as_str() {
                "uniform" => AveragingScheme::Uniform,
                "determinantal" => AveragingScheme::Determinantal,
                other => return Err(Error::Config(format!("unknown averaging `{other}`"))),
            };
        }
        if let Some(s) = &file.format {
            c.format = OutputFormat::parse(s)?;
        }
        if file.seeds.is_some() && file.trials.is_none() {
            c.trials = c.seeds.len();
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.lambda > 0.0) {
            return fail(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.lambda_grid.iter().any(|l| !(*l > 0.0)) {
            return fail("lambda_grid entries must be positive".into());
        }
        if self.lambda_prime_grid.iter().any(|l| !(*l >= 0.0)) {
            return fail("lambda_prime_grid entries must be nonnegative".into());
        }
        for (name, grid) in [("q_grid", &self.q_grid), ("m_grid", &self.m_grid)] {
            if grid.is_empty() || grid.contains(&0) {
                return fail(format!("{name} must be nonempty with positive entries"));
            }
        }
        if self.m == 0 || self.q == 0 || self.t_max == 0 || self.trials == 0 || self.draws == 0 {
            return fail("m, q, t_max, trials and draws must be positive".into());
        }
        if self.lambda_grid.is_empty() {
            return fail("lambda_grid must be nonempty".into());
        }
        if !self.seeds.is_empty() {
            if self.seeds.len() != self.trials {
                return fail(format!("{} seeds given for {} trials", self.seeds.len(), self.trials));
            }
            if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
                return fail("seeds must be distinct".into());
            }
        }
        if self.threads == Some(0) {
            return fail("threads must be at least 1".into());
        }
        if !(self.barrier_t > 0.0) {
            return fail("barrier_t must be positive".into());
        }
        Ok(())
    }

    /// Seed of trial `k`.
    pub fn trial_seed(&self, k: usize) -> u64 {
        self.seeds
            .get(k)
            .copied()
            .unwrap_or_else(|| rng::derive_seed(self.seed, &[k as u64]))
    }

    pub fn trial_seeds(&self) -> Vec<u64> {
        (0..self.trials).map(|k| self.trial_seed(k)).collect()
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match self.dataset.strip_prefix("synthetic:") {
            Some(name) => Ok(dataset::synthetic(name, self.data_seed)?.preprocess(self.preprocessing)),
            None => dataset::load_dataset(Path::new(&self.dataset), self.data_format, self.preprocessing),
        }
    }

    /// Writes every configuration value into the report's echo.
    pub fn echo_into(&self, report: &mut ExperimentReport) {
        let list = |v: &[String]| format!("[{}]", v.join(","));
        let nums = |v: Vec<String>| list(&v);
        report.echo("schema_version", SCHEMA_VERSION);
        report.echo("experiment", self.experiment.name());
        report.echo("dataset", &self.dataset);
        report.echo("preprocessing", self.preprocessing.name());
        report.echo("data_seed", self.data_seed);
        report.echo("loss", self.loss.name());
        report.echo("sketches", nums(self.sketches.iter().map(|s| s.name().to_string()).collect()));
        report.echo("lambda", self.lambda);
        report.echo("lambda_grid", nums(self.lambda_grid.iter().map(|v| v.to_string()).collect()));
        report.echo(
            "lambda_prime_grid",
            nums(self.lambda_prime_grid.iter().map(|v| v.to_string()).collect()),
        );
        report.echo("m", self.m);
        report.echo("m_grid", nums(self.m_grid.iter().map(|v| v.to_string()).collect()));
        report.echo("q", self.q);
        report.echo("q_grid", nums(self.q_grid.iter().map(|v| v.to_string()).collect()));
        report.echo("t_max", self.t_max);
        report.echo("trials", self.trials);
        report.echo("seed", self.seed);
        report.echo("draws", self.draws);
        report.echo("fresh_sketches", self.fresh_sketches);
    }
}
