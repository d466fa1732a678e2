//! Config-driven experiment runs.
//!
//! A run is described by a TOML file:
//!
//! ```toml
//! spec_version = 1
//! seeds = [0, 1]
//! replicates = 4
//! output_dir = "out"
//!
//! [problem]
//! name = "rosenbrock"
//! x0 = [-1.2, 1.0]
//!
//! [algorithm]
//! kind = "ds"
//!
//! [algorithm.ds]
//! c = 0.001
//! sigma0 = 0.25
//! stop = { max_iter = 5000 }
//!
//! [noise]
//! kind = "gaussian"
//! sigma_f = 0.01
//!
//! [accuracy]
//! eps_f = 0.0001
//! ```
//!
//! Replicate `r` uses seed `seeds[r % seeds.len()]` and stream `r`. Each
//! replicate writes `replicate_<r>.csv`; the whole run writes `summary.json`
//! with the resolved config, the feasibility report and one entry per
//! replicate.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::direct_search::{minimize, DsConfig, StoppingRule, Termination, TieBreak};
use crate::error::{Error, Result};
use crate::gda::{gda_solve, GdaConfig};
use crate::minmax::{fne_residual, solve, GameConstants, InnerToleranceMode, MinMaxConfig, PlayerNoise};
use crate::objective::Objective;
use crate::point::Point;
use crate::problems::{min_problem, quadratic_saddle, Game, LabeledDataset, RobustRegression};
use crate::rng::RngStream;
use crate::spanning::{self, random_unit_vector, SpanningKind};
use crate::stochastic::{AccuracyConfig, NoiseModel, NoisyOracle};
use crate::theory::{check_nonconvex_constants, FeasibilityReport, Inequality};
use crate::trace::{phased_trace_to_csv_string, trace_to_csv_string};

pub const SPEC_VERSION: u32 = 1;

/// Process exit codes of `dsmm run` and `dsmm validate`.
pub mod exit {
    pub const OK: i32 = 0;
    /// Malformed config, unknown suite or bad arguments.
    pub const USAGE: i32 = 1;
    pub const INFEASIBLE: i32 = 2;
    /// A replicate ran out of budget or a min-max run did not converge.
    pub const BUDGET: i32 = 3;
    /// A replicate failed at runtime, or a validation check failed.
    pub const FAILURE: i32 = 4;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemName {
    QuadraticMin,
    Rosenbrock,
    PlNonconvexMin,
    QuadraticSaddle,
    RobustRegression,
}

impl ProblemName {
    fn as_str(self) -> &'static str {
        match self {
            Self::QuadraticMin => "quadratic_min",
            Self::Rosenbrock => "rosenbrock",
            Self::PlNonconvexMin => "pl_nonconvex_min",
            Self::QuadraticSaddle => "quadratic_saddle",
            Self::RobustRegression => "robust_regression",
        }
    }

    fn is_game(self) -> bool {
        matches!(self, Self::QuadraticSaddle | Self::RobustRegression)
    }
}

fn two() -> usize {
    2
}
fn one() -> f64 {
    1.0
}
fn fifty() -> usize {
    50
}
fn five() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: ProblemName,
    /// Dimension of `quadratic_min`.
    #[serde(default = "two")]
    pub dim: usize,
    pub x0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    /// Starts are moved by this distance in a random direction per replicate.
    #[serde(default)]
    pub start_radius: f64,
    /// Regularization of `robust_regression`.
    #[serde(default = "one")]
    pub lambda: f64,
    /// CSV dataset for `robust_regression`, relative to the config file.
    pub dataset: Option<PathBuf>,
    /// Synthetic dataset parameters, used when `dataset` is absent.
    #[serde(default)]
    pub dataset_seed: u64,
    #[serde(default = "fifty")]
    pub n: usize,
    #[serde(default = "five")]
    pub d: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Ds,
    Minmax,
    Gda,
}

/// Direct-search settings of a `ds` run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DsBlock {
    pub c: f64,
    pub gamma: f64,
    pub sigma0: f64,
    pub sigma_max: f64,
    pub max_iterations: u64,
    pub max_oracle_calls: u64,
    pub tie_break: TieBreak,
    pub spanning: SpanningKind,
    pub stop: StoppingRule,
    /// Lyapunov weight checked by the feasibility gate; `None` uses the
    /// smallest weight allowed by the step-size condition.
    pub v: Option<f64>,
}

impl Default for DsBlock {
    fn default() -> Self {
        let d = DsConfig::default();
        Self {
            c: d.c,
            gamma: d.gamma,
            sigma0: d.sigma0,
            sigma_max: d.sigma_max,
            max_iterations: d.max_iterations,
            max_oracle_calls: d.max_oracle_calls,
            tie_break: d.tie_break,
            spanning: SpanningKind::OrthonormalPm,
            stop: StoppingRule {
                max_iter: Some(10_000),
                ..StoppingRule::default()
            },
            v: None,
        }
    }
}

impl DsBlock {
    pub fn config(&self) -> DsConfig {
        DsConfig {
            c: self.c,
            gamma: self.gamma,
            sigma0: self.sigma0,
            sigma_max: self.sigma_max,
            max_iterations: self.max_iterations,
            max_oracle_calls: self.max_oracle_calls,
            tie_break: self.tie_break,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub kind: AlgorithmKind,
    #[serde(default)]
    pub ds: DsBlock,
    #[serde(default)]
    pub minmax: MinMaxConfig,
    #[serde(default)]
    pub gda: GdaConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_replicates() -> usize {
    1
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("dsmm-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec_version: u32,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Relative paths are resolved against the config file's directory.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub problem: ProblemSpec,
    pub algorithm: AlgorithmSpec,
    #[serde(default)]
    pub noise: NoiseModel,
    pub accuracy: Option<AccuracyConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.spec_version != SPEC_VERSION {
            return Err(Error::Config(format!(
                "spec_version = {} is not supported (expected {SPEC_VERSION})",
                self.spec_version
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        let game_algo = self.algorithm.kind != AlgorithmKind::Ds;
        if game_algo != self.problem.name.is_game() {
            return Err(Error::Config(format!(
                "problem `{}` does not fit algorithm `{:?}`",
                self.problem.name.as_str(),
                self.algorithm.kind
            )));
        }
        if !(self.problem.start_radius >= 0.0) {
            return Err(Error::Config("start_radius must be >= 0".into()));
        }
        self.noise.validate()?;
        if let Some(a) = &self.accuracy {
            a.validate()?;
        }
        match self.algorithm.kind {
            AlgorithmKind::Ds => self.algorithm.ds.config().validate(),
            AlgorithmKind::Minmax => self.algorithm.minmax.validate(),
            AlgorithmKind::Gda => self.algorithm.gda.validate(),
        }
    }

    /// The accuracy the runs use: the explicit block, zero accuracy terms for
    /// noiseless runs without one, and the defaults otherwise.
    pub fn effective_accuracy(&self) -> AccuracyConfig {
        match self.accuracy {
            Some(a) => a,
            None if self.noise.is_noiseless() => AccuracyConfig {
                eps_f: 0.0,
                l_f: 0.0,
                ..AccuracyConfig::default()
            },
            None => AccuracyConfig::default(),
        }
    }

    /// Copy with every default written out.
    pub fn resolved(&self) -> Self {
        Self {
            accuracy: Some(self.effective_accuracy()),
            ..self.clone()
        }
    }
}

/// Smallest `v` satisfying `v/(1−v) ≥ (γ² − γ⁻²)/(c − 2ε_f)`, or 1/2 when
/// `c ≤ 2ε_f` (the report then fails on that margin anyway).
pub fn tight_lyapunov_weight(c: f64, eps_f: f64, gamma: f64) -> f64 {
    let margin = c - 2.0 * eps_f;
    if margin <= 0.0 {
        return 0.5;
    }
    let r = (gamma * gamma - 1.0 / (gamma * gamma)) / margin;
    r / (1.0 + r)
}

fn prefixed(report: FeasibilityReport, prefix: &str) -> FeasibilityReport {
    FeasibilityReport {
        satisfied: report.satisfied,
        inequalities: report
            .inequalities
            .into_iter()
            .map(|i| Inequality {
                name: format!("{prefix}{}", i.name),
                ..i
            })
            .collect(),
    }
}

/// Checks the constants of `cfg` before anything runs.
pub fn feasibility(cfg: &ExperimentConfig) -> Result<FeasibilityReport> {
    let acc = cfg.effective_accuracy();
    let mut report = FeasibilityReport {
        satisfied: true,
        inequalities: Vec::new(),
    };
    match cfg.algorithm.kind {
        AlgorithmKind::Ds => {
            let ds = &cfg.algorithm.ds;
            let v = ds.v.unwrap_or_else(|| tight_lyapunov_weight(ds.c, acc.eps_f, ds.gamma));
            report = report.merge(check_nonconvex_constants(
                ds.c, acc.eps_f, v, acc.p_f, ds.gamma, acc.l_f,
            ));
        }
        AlgorithmKind::Minmax => {
            let mm = &cfg.algorithm.minmax;
            if !cfg.noise.is_noiseless() {
                for (name, c) in [("x: ", mm.c_x), ("y: ", mm.c_y)] {
                    let v = tight_lyapunov_weight(c, acc.eps_f, mm.gamma);
                    let r = check_nonconvex_constants(c, acc.eps_f, v, acc.p_f, mm.gamma, acc.l_f);
                    report = report.merge(prefixed(r, name));
                }
            }
            if mm.inner_tolerance_mode == InnerToleranceMode::TheoryDriven {
                let game = build_game(cfg, Path::new("."))?;
                let gc = GameConstants::for_game(&*game, mm, &player_noise(cfg))?;
                let k = mm.k.unwrap_or(0.5 * (mm.c_x - gc.d1));
                let mut checks = vec![Inequality::strict("c_x > K + D₁", mm.c_x, k + gc.d1)];
                if gc.eps_x > 0.0 {
                    checks.push(Inequality::strict("K > 2ε_x", k, 2.0 * gc.eps_x));
                }
                report = report.merge(FeasibilityReport::from_checks(checks));
            }
        }
        AlgorithmKind::Gda => {}
    }
    Ok(report)
}

fn player_noise(cfg: &ExperimentConfig) -> PlayerNoise {
    PlayerNoise::same(cfg.noise, cfg.effective_accuracy())
}

fn build_game(cfg: &ExperimentConfig, base: &Path) -> Result<Box<dyn Game>> {
    let p = &cfg.problem;
    match p.name {
        ProblemName::QuadraticSaddle => Ok(Box::new(quadratic_saddle())),
        ProblemName::RobustRegression => {
            let data = match &p.dataset {
                Some(path) => LabeledDataset::load_csv(base.join(path))?,
                None => LabeledDataset::synthetic(p.dataset_seed, p.n, p.d)?,
            };
            Ok(Box::new(RobustRegression::new(&data, p.lambda)?))
        }
        other => Err(Error::Config(format!("`{}` is not a game", other.as_str()))),
    }
}

fn start(given: &Option<Vec<f64>>, default: Point, radius: f64, rng: RngStream) -> Result<Point> {
    let dim = default.dim();
    let x = match given {
        Some(v) => Point::new(v.clone())?,
        None => default,
    };
    if x.dim() != dim {
        return Err(Error::InvalidDimension(format!(
            "start has dimension {}, expected {dim}",
            x.dim()
        )));
    }
    if radius > 0.0 {
        let u = random_unit_vector(x.dim(), &mut rng.rng());
        Ok(x.offset(radius, &u))
    } else {
        Ok(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    BudgetExhausted,
    NotConverged,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub replicate: usize,
    pub seed: u64,
    pub stream: u64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub trace_file: Option<String>,
    pub termination: Option<Termination>,
    /// DS iterations, min-max outer iterations or GDA epochs.
    pub iterations: u64,
    /// Function evaluations for `ds`/`minmax`, gradient evaluations for `gda`.
    pub calls: u64,
    pub final_x: Vec<f64>,
    pub final_y: Option<Vec<f64>>,
    pub final_value: Option<f64>,
    /// `‖∇f‖` at the final point (`ds`).
    pub grad_norm: Option<f64>,
    /// `(‖∇_x f‖, ‖∇_y f‖)` at the final pair (`minmax`, `gda`).
    pub residual: Option<(f64, f64)>,
    /// First iteration with `‖∇f‖ ≤ grad_target` (`ds`), or first outer
    /// iteration with both residuals `≤ eps_target` (`minmax`).
    pub hitting_time: Option<u64>,
    pub eps_max: Option<f64>,
}

impl RunSummary {
    fn failed(replicate: usize, seed: u64, stream: u64, e: &Error) -> Self {
        Self {
            replicate,
            seed,
            stream,
            status: RunStatus::Error,
            error: Some(e.to_string()),
            trace_file: None,
            termination: None,
            iterations: 0,
            calls: 0,
            final_x: Vec::new(),
            final_y: None,
            final_value: None,
            grad_norm: None,
            residual: None,
            hitting_time: None,
            eps_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub feasibility: FeasibilityReport,
    pub exit_code: i32,
    pub runs: Vec<RunSummary>,
}

/// Outcome of [`run_experiment`]: the summary and where it was written.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub summary: Summary,
    pub output_dir: Option<PathBuf>,
}

fn trace_name(r: usize) -> String {
    format!("replicate_{r:03}.csv")
}

fn run_ds(cfg: &ExperimentConfig, r: usize, rng: RngStream) -> Result<(RunSummary, String)> {
    let p = &cfg.problem;
    let problem = min_problem(p.name.as_str(), p.dim)?;
    let x0 = start(
        &p.x0,
        default_min_start(p.name, problem.dim()),
        p.start_radius,
        rng.fork(1),
    )?;
    let block = &cfg.algorithm.ds;
    let set = spanning::make(block.spanning, problem.dim(), rng.fork(2))?;
    let oracle = NoisyOracle::new(&problem, cfg.noise, cfg.effective_accuracy());
    let st = minimize(x0, &set, &oracle, &block.config(), &block.stop, rng.fork(3))?;
    let termination = st.termination;
    let hitting_time = block
        .stop
        .grad_target
        .and_then(|t| {
            st.history
                .iter()
                .find(|h| h.grad_norm.is_some_and(|g| g <= t))
                .map(|h| h.iteration)
        })
        .or_else(|| (termination == Some(Termination::GradTarget)).then_some(st.iteration));
    let summary = RunSummary {
        replicate: r,
        seed: rng.seed,
        stream: rng.stream_id,
        status: if st.budget_exhausted {
            RunStatus::BudgetExhausted
        } else {
            RunStatus::Ok
        },
        error: None,
        trace_file: Some(trace_name(r)),
        termination,
        iterations: st.iteration,
        calls: st.oracle_calls,
        final_value: Some(problem.value(&st.x)),
        grad_norm: problem.gradient(&st.x).map(|g| g.norm()),
        final_x: st.x.into_vec(),
        final_y: None,
        residual: None,
        hitting_time,
        eps_max: None,
    };
    Ok((summary, trace_to_csv_string(&st.history)))
}

fn default_min_start(name: ProblemName, dim: usize) -> Point {
    match name {
        ProblemName::Rosenbrock => Point::from([-1.2, 1.0]),
        _ => Point::from(vec![1.0; dim]),
    }
}

fn game_starts(cfg: &ExperimentConfig, game: &dyn Game, rng: RngStream) -> Result<(Point, Point)> {
    let p = &cfg.problem;
    let (dx, dy) = match p.name {
        ProblemName::RobustRegression => (
            Point::zeros(game.dim_x()),
            Point::from(vec![1.0 / game.dim_y() as f64; game.dim_y()]),
        ),
        _ => (
            Point::from(vec![1.0; game.dim_x()]),
            Point::from(vec![1.0; game.dim_y()]),
        ),
    };
    Ok((
        start(&p.x0, dx, p.start_radius, rng.fork(1))?,
        start(&p.y0, dy, 0.0, rng)?,
    ))
}

fn run_minmax(cfg: &ExperimentConfig, base: &Path, r: usize, rng: RngStream) -> Result<(RunSummary, String)> {
    let game = build_game(cfg, base)?;
    let (x0, y0) = game_starts(cfg, &*game, rng)?;
    let mm = &cfg.algorithm.minmax;
    let noise = player_noise(cfg);
    let gc = match game.constants() {
        Some(_) => Some(GameConstants::for_game(&*game, mm, &noise)?),
        None => None,
    };
    let res = solve(&*game, x0, y0, gc.as_ref(), mm, &noise, rng.fork(3))?;
    let residual = fne_residual(&*game, &res.x, &res.y);
    let hitting_time = res
        .outer
        .iter()
        .find(|o| {
            let (a, b) = fne_residual(&*game, &o.x, &o.y);
            a <= mm.eps_target && b <= mm.eps_target
        })
        .map(|o| o.t);
    let summary = RunSummary {
        replicate: r,
        seed: rng.seed,
        stream: rng.stream_id,
        status: if res.converged {
            RunStatus::Ok
        } else {
            RunStatus::NotConverged
        },
        error: None,
        trace_file: Some(trace_name(r)),
        termination: None,
        iterations: res.outer.len() as u64,
        calls: res.oracle_calls,
        final_value: Some(game.value(&res.x, &res.y)),
        grad_norm: None,
        final_x: res.x.into_vec(),
        final_y: Some(res.y.into_vec()),
        residual: Some(residual),
        hitting_time,
        eps_max: Some(res.eps_max),
    };
    Ok((summary, phased_trace_to_csv_string(&res.trace)))
}

fn run_gda(cfg: &ExperimentConfig, base: &Path, r: usize, rng: RngStream) -> Result<(RunSummary, String)> {
    let game = build_game(cfg, base)?;
    let (x0, y0) = game_starts(cfg, &*game, rng)?;
    let g = &cfg.algorithm.gda;
    let res = gda_solve(&*game, x0, y0, g)?;
    let summary = RunSummary {
        replicate: r,
        seed: rng.seed,
        stream: rng.stream_id,
        status: if g.max_gradient_calls.is_some() && res.epochs < g.max_epochs {
            RunStatus::BudgetExhausted
        } else {
            RunStatus::Ok
        },
        error: None,
        trace_file: Some(trace_name(r)),
        termination: None,
        iterations: res.epochs,
        calls: res.gradient_calls,
        final_value: Some(game.value(&res.x, &res.y)),
        grad_norm: None,
        residual: Some(fne_residual(&*game, &res.x, &res.y)),
        final_x: res.x.into_vec(),
        final_y: Some(res.y.into_vec()),
        hitting_time: None,
        eps_max: None,
    };
    Ok((summary, phased_trace_to_csv_string(&res.trace)))
}

/// Runs replicate `r` and returns its summary and trace CSV.
pub fn run_replicate(cfg: &ExperimentConfig, base: &Path, r: usize) -> Result<(RunSummary, String)> {
    let rng = RngStream::new(cfg.seeds[r % cfg.seeds.len()], r as u64);
    match cfg.algorithm.kind {
        AlgorithmKind::Ds => run_ds(cfg, r, rng),
        AlgorithmKind::Minmax => run_minmax(cfg, base, r, rng),
        AlgorithmKind::Gda => run_gda(cfg, base, r, rng),
    }
}

fn exit_code(runs: &[RunSummary]) -> i32 {
    let worst = |s: RunStatus| runs.iter().any(|r| r.status == s);
    if worst(RunStatus::Error) {
        exit::FAILURE
    } else if worst(RunStatus::BudgetExhausted) || worst(RunStatus::NotConverged) {
        exit::BUDGET
    } else {
        exit::OK
    }
}

/// Worker count: `DSMM_JOBS` when set and valid, else `jobs`, else all cores.
pub fn resolve_jobs(jobs: Option<usize>) -> usize {
    std::env::var("DSMM_JOBS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .or(jobs.filter(|&n| n > 0))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Checks feasibility, runs every replicate on `jobs` workers and writes the
/// traces and `summary.json` under the output directory (relative to
/// `base`). Infeasible configs write nothing.
pub fn run_experiment(cfg: &ExperimentConfig, base: &Path, jobs: usize) -> Result<RunOutcome> {
    cfg.validate()?;
    let resolved = cfg.resolved();
    let report = feasibility(cfg)?;
    if !report.satisfied {
        return Ok(RunOutcome {
            exit_code: exit::INFEASIBLE,
            summary: Summary {
                config: resolved,
                feasibility: report,
                exit_code: exit::INFEASIBLE,
                runs: Vec::new(),
            },
            output_dir: None,
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<(RunSummary, Option<String>)> = pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| match run_replicate(cfg, base, r) {
                Ok((s, csv)) => (s, Some(csv)),
                Err(e) => {
                    let rng = RngStream::new(cfg.seeds[r % cfg.seeds.len()], r as u64);
                    (RunSummary::failed(r, rng.seed, rng.stream_id, &e), None)
                }
            })
            .collect()
    });
    let dir = base.join(&cfg.output_dir);
    fs::create_dir_all(&dir)?;
    let mut runs = Vec::with_capacity(results.len());
    for (summary, csv) in results {
        if let (Some(name), Some(csv)) = (&summary.trace_file, csv) {
            fs::write(dir.join(name), csv)?;
        }
        runs.push(summary);
    }
    let code = exit_code(&runs);
    let summary = Summary {
        config: resolved,
        feasibility: report,
        exit_code: code,
        runs,
    };
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    fs::write(dir.join("summary.json"), json)?;
    Ok(RunOutcome {
        exit_code: code,
        summary,
        output_dir: Some(dir),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
spec_version = 1
[problem]
name = "quadratic_min"
[algorithm]
kind = "ds"
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.seeds, vec![0]);
        assert_eq!(cfg.replicates, 1);
        assert_eq!(cfg.algorithm.ds.c, DsConfig::default().c);
        let acc = cfg.effective_accuracy();
        assert_eq!((acc.eps_f, acc.l_f), (0.0, 0.0));
    }

    #[test]
    fn unknown_field_is_rejected_with_location() {
        let err = ExperimentConfig::from_toml(&format!("{MINIMAL}\nbogus = 1\n")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = MINIMAL.replace("spec_version = 1", "spec_version = 2");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))));
    }

    #[test]
    fn problem_must_match_algorithm() {
        let text = MINIMAL.replace("quadratic_min", "quadratic_saddle");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn tight_weight_meets_the_step_condition() {
        let v = tight_lyapunov_weight(1.0, 0.1, 2.0);
        let r = check_nonconvex_constants(1.0, 0.1, v, 0.9, 2.0, 0.01);
        assert!(r.satisfied, "{:?}", r.violated().collect::<Vec<_>>());
    }

    #[test]
    fn small_c_is_infeasible() {
        let text = format!(
            "{MINIMAL}[algorithm.ds]\nc = 0.1\n[noise]\nkind = \"gaussian\"\nsigma_f = 1.0\n[accuracy]\neps_f = 0.1\n"
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let rep = feasibility(&cfg).unwrap();
        assert!(!rep.satisfied);
        assert!(rep.violated().any(|i| i.name == "c − 2ε_f > 0"));
    }

    #[test]
    fn jobs_env_wins() {
        // Only the argument path is exercised here; the variable is covered by the CLI tests.
        if std::env::var("DSMM_JOBS").is_err() {
            assert_eq!(resolve_jobs(Some(3)), 3);
        }
    }
}
