//! Executable checks of the convergence theory.
//!
//! Parameter feasibility, the reflected random-walk bound, PL consequences,
//! the expected Lyapunov decrease of a single step, the unsuccessful-step
//! bound `σ_k ≥ C‖∇f(x_k)‖`, and hitting-time scaling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::direct_search::{ds_step, DsConfig, SearchState};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::point::Point;
use crate::problems::MinProblem;
use crate::rng::RngStream;
use crate::spanning::{random_unit_vector, SpanningSet};
use crate::stochastic::NoisyOracle;

/// Relative slack for non-strict inequalities.
const REL_TOL: f64 = 1e-12;

/// One named inequality `lhs (≥ | >) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

impl Inequality {
    pub fn strict(name: &str, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            satisfied: lhs > rhs,
        }
    }

    pub fn at_least(name: &str, lhs: f64, rhs: f64) -> Self {
        let slack = REL_TOL * rhs.abs().max(1.0);
        Self {
            name: name.into(),
            lhs,
            rhs,
            satisfied: lhs >= rhs - slack,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub satisfied: bool,
    pub inequalities: Vec<Inequality>,
}

impl FeasibilityReport {
    pub fn from_checks(inequalities: Vec<Inequality>) -> Self {
        Self {
            satisfied: inequalities.iter().all(|i| i.satisfied),
            inequalities,
        }
    }

    pub fn violated(&self) -> impl Iterator<Item = &Inequality> {
        self.inequalities.iter().filter(|i| !i.satisfied)
    }

    pub fn merge(mut self, other: FeasibilityReport) -> Self {
        self.inequalities.extend(other.inequalities);
        self.satisfied = self.inequalities.iter().all(|i| i.satisfied);
        self
    }
}

fn domain_checks(v: f64, p_f: f64, gamma: f64) -> Vec<Inequality> {
    vec![
        Inequality::strict("γ > 1", gamma, 1.0),
        Inequality::strict("v > 0", v, 0.0),
        Inequality::strict("1 > v", 1.0, v),
        Inequality::strict("p_f > 1/2", p_f, 0.5),
        Inequality::strict("1 > p_f", 1.0, p_f),
    ]
}

fn lyapunov_checks(c: f64, eps_f: f64, v: f64, p_f: f64, gamma: f64, l_f: f64) -> Vec<Inequality> {
    let margin = c - 2.0 * eps_f;
    let g2 = gamma * gamma;
    let ratio = v / (1.0 - v);
    vec![
        Inequality::strict("c − 2ε_f > 0", margin, 0.0),
        Inequality::at_least(
            "p_f/√(1−p_f) ≥ 4v·l_f/((1−v)(1−γ⁻²))",
            p_f / (1.0 - p_f).sqrt(),
            4.0 * v * l_f / ((1.0 - v) * (1.0 - 1.0 / g2)),
        ),
        Inequality::at_least(
            "v/(1−v) ≥ (γ² − γ⁻²)/(c − 2ε_f)",
            ratio,
            if margin > 0.0 {
                (g2 - 1.0 / g2) / margin
            } else {
                f64::INFINITY
            },
        ),
    ]
}

/// Conditions under which the Lyapunov function decreases in expectation.
pub fn check_nonconvex_constants(c: f64, eps_f: f64, v: f64, p_f: f64, gamma: f64, l_f: f64) -> FeasibilityReport {
    let mut checks = domain_checks(v, p_f, gamma);
    checks.extend(lyapunov_checks(c, eps_f, v, p_f, gamma, l_f));
    FeasibilityReport::from_checks(checks)
}

/// The strengthened conditions of the PL rate.
pub fn check_pl_constants(c: f64, eps_f: f64, l_f: f64, v: f64, p_f: f64, gamma: f64) -> FeasibilityReport {
    let mut checks = domain_checks(v, p_f, gamma);
    checks.extend(lyapunov_checks(c, eps_f, v, p_f, gamma, l_f));
    checks.push(Inequality::strict("c > 4ε_f", c, 4.0 * eps_f));
    checks.push(Inequality::strict(
        "c > 2√2·l_f",
        c,
        2.0 * std::f64::consts::SQRT_2 * l_f,
    ));
    checks.push(Inequality::at_least(
        "v/(1−v) ≥ 72γ²/c",
        v / (1.0 - v),
        72.0 * gamma * gamma / c,
    ));
    FeasibilityReport::from_checks(checks)
}

/// Reflected walk: length `n`, down with probability `p_f`, target
/// confinement probability `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub p_f: f64,
    pub n: u64,
    pub delta: f64,
}

impl WalkConfig {
    fn validate(&self) -> Result<()> {
        if !(self.p_f > 0.5 && self.p_f < 1.0) {
            return Err(Error::InvalidProbability(self.p_f));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidProbability(self.delta));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("walk length n must be >= 1".into()));
        }
        Ok(())
    }
}

/// Stationary mass `1 − ((1−p)/p)^{k+1}` of the reflected walk on `[0, k]`.
pub fn stationary_tail(p_f: f64, k: u32) -> f64 {
    -(((1.0 - p_f) / p_f).ln() * f64::from(k + 1)).exp_m1()
}

/// Smallest `k ≥ 0` whose stationary mass on `[0, k]` is at least `δ^{1/n}`.
pub fn walk_confinement_k(cfg: &WalkConfig) -> Result<u32> {
    cfg.validate()?;
    let log_q = ((1.0 - cfg.p_f) / cfg.p_f).ln();
    // ln(1 − δ^{1/n}), accurate for δ^{1/n} close to 1.
    let log_gap = (-(cfg.delta.ln() / cfg.n as f64).exp_m1()).ln();
    let meets = |k: u32| f64::from(k + 1) * log_q <= log_gap;
    let raw = log_gap / log_q - 1.0;
    let mut k = raw.ceil().max(0.0) as u32;
    while !meets(k) {
        k += 1;
    }
    while k > 0 && meets(k - 1) {
        k -= 1;
    }
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WalkEstimate {
    pub k: u32,
    pub probability: f64,
    pub stderr: f64,
    pub replicates: u64,
}

const WALK_CHUNK: u64 = 4096;

/// Monte Carlo probability that a walk of `cfg.n` steps started at 0 stays
/// in `[0, k]`. Each step goes down (reflecting at 0) with probability `p_f`
/// and up otherwise.
pub fn simulate_reflected_walk(cfg: &WalkConfig, k: u32, replicates: u64, rng: RngStream) -> Result<WalkEstimate> {
    if !(cfg.p_f > 0.0 && cfg.p_f < 1.0) {
        return Err(Error::InvalidProbability(cfg.p_f));
    }
    if replicates == 0 {
        return Err(Error::InvalidParameter("replicates must be >= 1".into()));
    }
    let chunks = replicates.div_ceil(WALK_CHUNK);
    let stayed: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng.fork(c).rng();
            let count = WALK_CHUNK.min(replicates - c * WALK_CHUNK);
            let mut inside = 0u64;
            for _ in 0..count {
                let mut pos = 0u32;
                let mut ok = true;
                for _ in 0..cfg.n {
                    if r.random::<f64>() < cfg.p_f {
                        pos = pos.saturating_sub(1);
                    } else {
                        pos += 1;
                        if pos > k {
                            ok = false;
                            break;
                        }
                    }
                }
                inside += u64::from(ok);
            }
            inside
        })
        .sum();
    let p = stayed as f64 / replicates as f64;
    Ok(WalkEstimate {
        k,
        probability: p,
        stderr: (p * (1.0 - p) / replicates as f64).sqrt(),
        replicates,
    })
}

/// Worst margins of the three PL consequences over random points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlImplicationReport {
    pub samples: usize,
    /// `min ½‖∇f‖² − μ(f − f*)`.
    pub pl_margin: f64,
    /// `min (f − f*) − (μ/2)‖x − x*‖²`.
    pub qg_margin: f64,
    /// `min (f − f*) − ‖∇f‖²/(2L)`.
    pub gradient_margin: f64,
    /// Points where some margin is below `−slack`.
    pub violations: usize,
    pub slack: f64,
}

impl PlImplicationReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Samples uniform points in the box of half-width `radius` around the
/// minimizer and checks PL, quadratic growth with constant `μ/2`, and the
/// gradient bound `f − f* ≥ ‖∇f‖²/(2L)`.
pub fn check_pl_implications(
    problem: &MinProblem,
    radius: f64,
    samples: usize,
    slack: f64,
    rng: RngStream,
) -> Result<PlImplicationReport> {
    let mu = problem
        .pl
        .ok_or_else(|| Error::InvalidParameter(format!("{} has no PL constant", problem.name)))?;
    let l = problem.lipschitz;
    let x_star = &problem.minimizer;
    let mut r = rng.rng();
    let mut report = PlImplicationReport {
        samples,
        pl_margin: f64::INFINITY,
        qg_margin: f64::INFINITY,
        gradient_margin: f64::INFINITY,
        violations: 0,
        slack,
    };
    for _ in 0..samples {
        let x = Point::from(
            x_star
                .iter()
                .map(|c| c + radius * (2.0 * r.random::<f64>() - 1.0))
                .collect::<Vec<_>>(),
        );
        let gap = problem.value(&x) - problem.f_star;
        let g2 = problem
            .gradient(&x)
            .ok_or_else(|| Error::InvalidParameter(format!("{} has no gradient", problem.name)))?
            .norm_sq();
        let pl = 0.5 * g2 - mu * gap;
        let qg = gap - 0.5 * mu * x.sub(x_star).norm_sq();
        let gb = gap - g2 / (2.0 * l);
        report.pl_margin = report.pl_margin.min(pl);
        report.qg_margin = report.qg_margin.min(qg);
        report.gradient_margin = report.gradient_margin.min(gb);
        if pl < -slack || qg < -slack || gb < -slack {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Monte Carlo estimate of `E[Φ_{k+1} − Φ_k]` for one step from `(x, σ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub x: Point,
    pub sigma: f64,
    pub mean: f64,
    pub stderr: f64,
    /// `−p_f (1 − v)(1 − γ⁻²) σ² / 2`.
    pub bound: f64,
    pub replicates: usize,
}

impl LyapunovEstimate {
    /// Mean within three standard errors of the bound or below it.
    pub fn passed(&self) -> bool {
        self.mean <= self.bound + 3.0 * self.stderr
    }
}

/// Runs `replicates` independent single steps of [`ds_step`] from `(x, σ)`
/// and averages the change of `Φ = v (f − f*) + (1 − v) σ²`.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_decrease<O: Objective>(
    oracle: &NoisyOracle<O>,
    f_star: f64,
    set: &SpanningSet,
    cfg: &DsConfig,
    v: f64,
    x: &Point,
    sigma: f64,
    replicates: usize,
    rng: RngStream,
) -> Result<LyapunovEstimate> {
    if replicates < 2 {
        return Err(Error::InvalidParameter("need at least two replicates".into()));
    }
    let f = oracle.objective();
    let phi = |x: &Point, s: f64| v * (f.value(x) - f_star) + (1.0 - v) * s * s;
    let phi0 = phi(x, sigma);
    let deltas: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut st = SearchState::new(x.clone(), sigma);
            ds_step(&mut st, set, oracle, cfg, rng.fork(r as u64))?;
            Ok(phi(&st.x, st.sigma) - phi0)
        })
        .collect::<Result<_>>()?;
    let n = deltas.len() as f64;
    let mean = deltas.iter().sum::<f64>() / n;
    let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let p_f = oracle.accuracy().p_f;
    let gamma = cfg.gamma;
    Ok(LyapunovEstimate {
        x: x.clone(),
        sigma,
        mean,
        stderr: (var / n).sqrt(),
        bound: -p_f * (1.0 - v) * (1.0 - 1.0 / (gamma * gamma)) * sigma * sigma / 2.0,
        replicates,
    })
}

/// Result of auditing `σ_k ≥ C‖∇f(x_k)‖` on unsuccessful iterations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma2Audit {
    pub constant: f64,
    pub iterations: u64,
    pub unsuccessful: u64,
    pub violations: u64,
    /// Smallest `σ_k / (C‖∇f(x_k)‖)` over unsuccessful iterations.
    pub min_ratio: f64,
    /// Iterates or trial points outside the region where `L` is valid.
    pub outside_region: u64,
}

impl Lemma2Audit {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.outside_region == 0
    }
}

/// Unsuccessful-step constant `2κ/(L + 2c + 4ε_f)`.
pub fn lemma2_constant(kappa: f64, l: f64, c: f64, eps_f: f64) -> f64 {
    2.0 * kappa / (l + 2.0 * c + 4.0 * eps_f)
}

/// Runs `iterations` noiseless steps from `x0` and audits every
/// unsuccessful one.
pub fn lemma2_audit(
    problem: &MinProblem,
    set: &SpanningSet,
    cfg: &DsConfig,
    x0: Point,
    iterations: u64,
    rng: RngStream,
) -> Result<Lemma2Audit> {
    let oracle = NoisyOracle::noiseless(problem);
    let constant = lemma2_constant(set.kappa_lower(), problem.lipschitz, cfg.c, 0.0);
    let mut st = SearchState::new(x0, cfg.sigma0);
    let mut audit = Lemma2Audit {
        constant,
        iterations: 0,
        unsuccessful: 0,
        violations: 0,
        min_ratio: f64::INFINITY,
        outside_region: 0,
    };
    for _ in 0..iterations {
        let x = st.x.clone();
        let sigma = st.sigma;
        if !problem.in_lipschitz_region(&x)
            || set
                .directions()
                .iter()
                .any(|d| !problem.in_lipschitz_region(&x.offset(sigma, d)))
        {
            audit.outside_region += 1;
        }
        let out = ds_step(&mut st, set, &oracle, cfg, rng)?;
        audit.iterations += 1;
        if out.success {
            continue;
        }
        audit.unsuccessful += 1;
        let g = problem
            .gradient(&x)
            .ok_or_else(|| Error::InvalidParameter(format!("{} has no gradient", problem.name)))?
            .norm();
        if g > 0.0 {
            let ratio = sigma / (constant * g);
            audit.min_ratio = audit.min_ratio.min(ratio);
            if ratio < 1.0 - REL_TOL {
                audit.violations += 1;
            }
        }
        if sigma < 1e-300 {
            break;
        }
    }
    Ok(audit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeMode {
    /// Regress `log T` on `log log(L (f(x₀) − f*) / ε)`.
    Pl,
    /// Regress `log T` on `log(1/ε)`.
    Nonconvex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeConfig {
    pub mode: SlopeMode,
    /// Strictly decreasing gradient targets, at least three.
    pub eps_grid: Vec<f64>,
    pub replicates: usize,
    /// Starts are drawn on the sphere of this radius around `center`.
    pub center: Point,
    pub radius: f64,
    pub ds: DsConfig,
    pub max_iter: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeEstimate {
    pub slope: f64,
    /// Regression abscissae, one per `ε`.
    pub xs: Vec<f64>,
    /// Replicate-mean hitting times, one per `ε`.
    pub mean_hitting_times: Vec<f64>,
}

/// First iteration at which `‖∇f(x_k)‖ ≤ ε`, for each `ε` of a decreasing
/// grid, from a single noiseless run.
pub fn hitting_times(
    problem: &MinProblem,
    set: &SpanningSet,
    cfg: &DsConfig,
    x0: Point,
    eps_grid: &[f64],
    max_iter: u64,
) -> Result<Vec<Option<u64>>> {
    let oracle = NoisyOracle::noiseless(problem);
    let grad = |x: &Point| {
        problem
            .gradient(x)
            .map(|g| g.norm())
            .ok_or_else(|| Error::InvalidParameter(format!("{} has no gradient", problem.name)))
    };
    let mut hits = vec![None; eps_grid.len()];
    let mut st = SearchState::new(x0, cfg.sigma0);
    let mut next = 0;
    loop {
        let g = grad(&st.x)?;
        while next < eps_grid.len() && g <= eps_grid[next] {
            hits[next] = Some(st.iteration);
            next += 1;
        }
        if next == eps_grid.len() || st.iteration >= max_iter || st.sigma < 1e-300 {
            return Ok(hits);
        }
        ds_step(&mut st, set, &oracle, cfg, RngStream::new(0, 0))?;
    }
}

/// Least-squares slope of `log E[T_ε]` against the mode's abscissa.
pub fn estimate_complexity_slope(
    problem: &MinProblem,
    set: &SpanningSet,
    cfg: &SlopeConfig,
    rng: RngStream,
) -> Result<SlopeEstimate> {
    if cfg.eps_grid.len() < 3 || cfg.eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(
            "eps_grid must hold at least three decreasing values".into(),
        ));
    }
    if cfg.replicates == 0 {
        return Err(Error::InvalidParameter("replicates must be >= 1".into()));
    }
    let starts: Vec<Point> = (0..cfg.replicates)
        .map(|r| {
            let u = random_unit_vector(cfg.center.dim(), &mut rng.fork(r as u64).rng());
            cfg.center.offset(cfg.radius, &u)
        })
        .collect();
    let runs: Vec<Vec<Option<u64>>> = starts
        .par_iter()
        .map(|x0| hitting_times(problem, set, &cfg.ds, x0.clone(), &cfg.eps_grid, cfg.max_iter))
        .collect::<Result<_>>()?;
    let mut means = Vec::with_capacity(cfg.eps_grid.len());
    for (j, eps) in cfg.eps_grid.iter().enumerate() {
        let mut total = 0.0;
        for run in &runs {
            match run[j] {
                Some(t) => total += t as f64,
                None => {
                    return Err(Error::Inconclusive(format!(
                        "a replicate did not reach ‖∇f‖ ≤ {eps} within {} iterations",
                        cfg.max_iter
                    )))
                }
            }
        }
        let mean = total / runs.len() as f64;
        if mean == 0.0 {
            return Err(Error::Inconclusive(format!("ε = {eps} is met at the start")));
        }
        means.push(mean);
    }
    let f0 = starts.iter().map(|x| problem.value(x) - problem.f_star).sum::<f64>() / starts.len() as f64;
    let xs: Vec<f64> = cfg
        .eps_grid
        .iter()
        .map(|&eps| match cfg.mode {
            SlopeMode::Nonconvex => (1.0 / eps).ln(),
            SlopeMode::Pl => (problem.lipschitz * f0 / eps).ln().ln(),
        })
        .collect();
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Inconclusive(
            "log-log abscissa undefined; start farther away".into(),
        ));
    }
    let ys: Vec<f64> = means.iter().map(|t| t.ln()).collect();
    Ok(SlopeEstimate {
        slope: least_squares_slope(&xs, &ys),
        xs,
        mean_hitting_times: means,
    })
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
