//! Desk-scale numerical checks behind `dsmm validate`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::direct_search::DsConfig;
use crate::error::{Error, Result};
use crate::point::Point;
use crate::problems::{pl_nonconvex_min, quadratic_min, rosenbrock};
use crate::rng::RngStream;
use crate::spanning::make_orthonormal_pm;
use crate::stochastic::{AccuracyConfig, NoiseModel, NoisyOracle};
use crate::theory::{
    check_nonconvex_constants, check_pl_implications, estimate_complexity_slope, lemma2_audit, lyapunov_decrease,
    simulate_reflected_walk, walk_confinement_k, FeasibilityReport, SlopeConfig, SlopeMode, WalkConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Lyapunov,
    Walk,
    Lemma2,
    PlImplications,
    ComplexitySlope,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = [
        "lyapunov",
        "walk",
        "lemma2",
        "pl-implications",
        "complexity-slope",
        "all",
    ];

    fn parts(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![
                Suite::Lyapunov,
                Suite::Walk,
                Suite::Lemma2,
                Suite::PlImplications,
                Suite::ComplexitySlope,
            ],
            s => vec![s],
        }
    }

    fn uses_constants(self) -> bool {
        matches!(self, Suite::Lyapunov | Suite::All)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = match self {
            Suite::Lyapunov => 0,
            Suite::Walk => 1,
            Suite::Lemma2 => 2,
            Suite::PlImplications => 3,
            Suite::ComplexitySlope => 4,
            Suite::All => 5,
        };
        f.write_str(Self::NAMES[i])
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "lyapunov" => Suite::Lyapunov,
            "walk" => Suite::Walk,
            "lemma2" => Suite::Lemma2,
            "pl-implications" => Suite::PlImplications,
            "complexity-slope" => Suite::ComplexitySlope,
            "all" => Suite::All,
            other => {
                return Err(Error::Config(format!(
                    "unknown suite `{other}` (expected one of {})",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }
}

/// Constants for the Lyapunov suite; `sigma_f` is the Gaussian noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoryConstants {
    pub c: f64,
    pub eps_f: f64,
    pub v: f64,
    pub p_f: f64,
    pub gamma: f64,
    pub l_f: f64,
    pub sigma_f: f64,
}

impl Default for TheoryConstants {
    fn default() -> Self {
        Self {
            c: 1.0,
            eps_f: 0.1,
            v: 0.825,
            p_f: 0.9,
            gamma: 2.0,
            l_f: 0.1,
            sigma_f: 1.0,
        }
    }
}

impl TheoryConstants {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn feasibility(&self) -> FeasibilityReport {
        check_nonconvex_constants(self.c, self.eps_f, self.v, self.p_f, self.gamma, self.l_f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SuiteOutcome {
    /// The constants failed the feasibility gate; nothing was simulated.
    Infeasible(FeasibilityReport),
    Checked(Vec<CheckLine>),
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, SuiteOutcome::Checked(lines) if lines.iter().all(|l| l.passed))
    }
}

fn line(suite: Suite, name: impl Into<String>, passed: bool, detail: String) -> CheckLine {
    CheckLine {
        suite: suite.to_string(),
        name: name.into(),
        passed,
        detail,
    }
}

fn lyapunov(k: &TheoryConstants, emit: &mut dyn FnMut(CheckLine)) -> Result<()> {
    let acc = AccuracyConfig {
        eps_f: k.eps_f,
        p_f: k.p_f,
        l_f: k.l_f,
        c0: 2.0,
        n_max: 1_000_000_000,
    };
    let oracle = NoisyOracle::new(quadratic_min(2)?, NoiseModel::gaussian(k.sigma_f), acc);
    let set = make_orthonormal_pm(2)?;
    let cfg = DsConfig {
        c: k.c,
        gamma: k.gamma,
        sigma0: 1.0,
        sigma_max: 100.0,
        ..DsConfig::default()
    };
    let states = [
        (Point::from([1.0, 1.0]), 1.0),
        (Point::from([2.0, -1.0]), 0.5),
        (Point::from([-3.0, 2.0]), 2.0),
    ];
    for (i, (x, sigma)) in states.iter().enumerate() {
        let est = lyapunov_decrease(
            &oracle,
            0.0,
            &set,
            &cfg,
            k.v,
            x,
            *sigma,
            1000,
            RngStream::new(100 + i as u64, 0),
        )?;
        emit(line(
            Suite::Lyapunov,
            format!("E[ΔΦ] at x = {:?}, σ = {sigma}", x.as_slice()),
            est.passed(),
            format!("mean {:.4} ± {:.4}, bound {:.4}", est.mean, est.stderr, est.bound),
        ));
    }
    Ok(())
}

fn walk(emit: &mut dyn FnMut(CheckLine)) -> Result<()> {
    let mut i = 0;
    for p_f in [0.6, 0.7, 0.9] {
        for n in [100, 1000] {
            for delta in [0.5, 0.9] {
                let cfg = WalkConfig { p_f, n, delta };
                let k = walk_confinement_k(&cfg)?;
                let est = simulate_reflected_walk(&cfg, k, 20_000, RngStream::new(5, i))?;
                emit(line(
                    Suite::Walk,
                    format!("p_f = {p_f}, n = {n}, δ = {delta}"),
                    est.probability >= delta - 3.0 * est.stderr,
                    format!("k = {k}, P(max ≤ k) = {:.4} ± {:.4}", est.probability, est.stderr),
                ));
                i += 1;
            }
        }
    }
    Ok(())
}

fn lemma2(emit: &mut dyn FnMut(CheckLine)) -> Result<()> {
    let set = make_orthonormal_pm(2)?;
    let quad = quadratic_min(2)?;
    let rosen = rosenbrock();
    for seed in 0..5 {
        let mut r = RngStream::new(seed, 0).rng();
        let xq = Point::from([r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)]);
        let xr = Point::from([-1.2 + r.random_range(-0.2..0.2), 1.0 + r.random_range(-0.2..0.2)]);
        let cq = DsConfig {
            c: 0.01,
            sigma0: 1.0,
            sigma_max: 10.0,
            ..DsConfig::default()
        };
        let cr = DsConfig {
            c: 1e-3,
            sigma0: 0.25,
            sigma_max: 0.5,
            ..DsConfig::default()
        };
        for (name, audit) in [
            (
                "quadratic_min",
                lemma2_audit(&quad, &set, &cq, xq, 300, RngStream::new(seed, 1))?,
            ),
            (
                "rosenbrock",
                lemma2_audit(&rosen, &set, &cr, xr, 5000, RngStream::new(seed, 2))?,
            ),
        ] {
            emit(line(
                Suite::Lemma2,
                format!("{name}, seed {seed}"),
                audit.passed(),
                format!(
                    "{} unsuccessful, {} violations, min σ/(C‖∇f‖) = {:.3}",
                    audit.unsuccessful, audit.violations, audit.min_ratio
                ),
            ));
        }
    }
    Ok(())
}

fn pl_implications(emit: &mut dyn FnMut(CheckLine)) -> Result<()> {
    for (i, (problem, radius)) in [(quadratic_min(2)?, 5.0), (pl_nonconvex_min(), 10.0)]
        .into_iter()
        .enumerate()
    {
        let rep = check_pl_implications(&problem, radius, 1000, 1e-10, RngStream::new(9, i as u64))?;
        emit(line(
            Suite::PlImplications,
            problem.name,
            rep.passed(),
            format!(
                "{} violations; worst margins PL {:.2e}, QG {:.2e}, gradient {:.2e}",
                rep.violations, rep.pl_margin, rep.qg_margin, rep.gradient_margin
            ),
        ));
    }
    Ok(())
}

fn complexity_slope(emit: &mut dyn FnMut(CheckLine)) -> Result<()> {
    let set = make_orthonormal_pm(2)?;
    let pl = SlopeConfig {
        mode: SlopeMode::Pl,
        eps_grid: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
        replicates: 10,
        center: Point::zeros(2),
        radius: 1.0,
        ds: DsConfig {
            c: 0.01,
            sigma0: 1.0,
            sigma_max: 10.0,
            ..DsConfig::default()
        },
        max_iter: 100_000,
    };
    let nonconvex = SlopeConfig {
        mode: SlopeMode::Nonconvex,
        eps_grid: vec![1e-1, 3e-2, 1e-2],
        replicates: 5,
        center: Point::from([-1.2, 1.0]),
        radius: 0.1,
        ds: DsConfig {
            c: 1e-3,
            sigma0: 0.25,
            sigma_max: 0.5,
            ..DsConfig::default()
        },
        max_iter: 1_000_000,
    };
    let cases = [
        ("quadratic_min, PL mode", quadratic_min(2)?, pl, 1.0 - 0.3, 1.0 + 0.3),
        (
            "rosenbrock, nonconvex mode",
            rosenbrock(),
            nonconvex,
            f64::NEG_INFINITY,
            2.5,
        ),
    ];
    for (i, (name, problem, cfg, lo, hi)) in cases.into_iter().enumerate() {
        let (passed, detail) = match estimate_complexity_slope(&problem, &set, &cfg, RngStream::new(3, i as u64)) {
            Ok(est) => (
                est.slope >= lo && est.slope <= hi,
                format!("slope {:.3}, accepted up to {hi}", est.slope),
            ),
            Err(e) => (false, e.to_string()),
        };
        emit(line(Suite::ComplexitySlope, name, passed, detail));
    }
    Ok(())
}

/// Runs `suite`, passing every check line to `emit` as soon as it is known.
///
/// Suites that use the constants gate on their feasibility first and return
/// [`SuiteOutcome::Infeasible`] without simulating anything.
pub fn run_suite(suite: Suite, constants: &TheoryConstants, mut emit: impl FnMut(&CheckLine)) -> Result<SuiteOutcome> {
    if suite.uses_constants() {
        let report = constants.feasibility();
        if !report.satisfied {
            return Ok(SuiteOutcome::Infeasible(report));
        }
    }
    let mut lines = Vec::new();
    let mut sink = |l: CheckLine| {
        emit(&l);
        lines.push(l);
    };
    for part in suite.parts() {
        match part {
            Suite::Lyapunov => lyapunov(constants, &mut sink)?,
            Suite::Walk => walk(&mut sink)?,
            Suite::Lemma2 => lemma2(&mut sink)?,
            Suite::PlImplications => pl_implications(&mut sink)?,
            Suite::ComplexitySlope => complexity_slope(&mut sink)?,
            Suite::All => unreachable!("`all` expands to its parts"),
        }
    }
    Ok(SuiteOutcome::Checked(lines))
}
