//! Direct-search minimization with sufficient decrease.
//!
//! Each iteration polls every direction of a spanning set at the current step
//! size, picks the offspring with the lowest estimate, and accepts it only if
//! it beats the incumbent estimate by the forcing term `c σ²`. Successful
//! iterations grow the step by `γ` (clipped at `sigma_max`), unsuccessful ones
//! shrink it by `γ`.
//!
//! [`minimize`] runs the full loop; [`one_step`] searches for a single
//! successful step, the building block of the min-max driver.
//!
//! Randomness: iteration `k` uses `rng.fork(k)`; the incumbent estimate uses
//! sub-stream 0 and offspring `i` sub-stream `i + 1`, so evaluation order
//! (including concurrent evaluation) cannot change the outcome. Estimates are
//! fresh every iteration, the incumbent included.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::point::Point;
use crate::rng::RngStream;
use crate::spanning::{make_probabilistic_pair, SpanningKind, SpanningSet};
use crate::stochastic::{Estimate, NoisyOracle};
use crate::trace::TraceRecord;

/// Stream tag used to redraw probabilistic direction pairs.
const DIRECTION_TAG: u64 = 1 << 40;
/// Default step-size floor of the full loop.
pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-12;
/// Below this many draws per step the offspring are estimated sequentially.
const PARALLEL_DRAWS: u64 = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Scan offspring in order and keep the first strict improvement.
    FirstIndex,
    /// Lowest index among offspring within one ulp-scale tolerance of the
    /// minimum, so rounding noise cannot reorder near-ties.
    #[default]
    LowestIndexAmongMin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DsConfig {
    /// Forcing constant in `ρ(σ) = c σ²`.
    pub c: f64,
    /// Step multiplier, `> 1`.
    pub gamma: f64,
    pub sigma0: f64,
    pub sigma_max: f64,
    /// Hard iteration budget.
    pub max_iterations: u64,
    /// Hard oracle-call budget.
    pub max_oracle_calls: u64,
    pub tie_break: TieBreak,
}

impl Default for DsConfig {
    fn default() -> Self {
        Self {
            c: 0.01,
            gamma: 2.0,
            sigma0: 1.0,
            sigma_max: 1e3,
            max_iterations: 1_000_000,
            max_oracle_calls: u64::MAX,
            tie_break: TieBreak::default(),
        }
    }
}

impl DsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!("c = {} must be > 0", self.c)));
        }
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma = {} must be > 1", self.gamma)));
        }
        if !(self.sigma0 > 0.0 && self.sigma0 <= self.sigma_max && self.sigma_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < sigma0 ({}) <= sigma_max ({})",
                self.sigma0, self.sigma_max
            )));
        }
        Ok(())
    }
}

/// Forcing function `ρ(σ) = c σ²`.
pub fn forcing(c: f64, sigma: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("forcing constant c = {c} must be > 0")));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidStep(sigma));
    }
    Ok(c * sigma * sigma)
}

/// Why [`minimize`] returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxIterations,
    MaxCalls,
    SigmaStop,
    SigmaFloor,
    GradTarget,
    /// A hard budget in [`DsConfig`] was hit.
    BudgetExhausted,
}

/// Stopping criteria for [`minimize`]; any criterion that is set can fire.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StoppingRule {
    pub max_iter: Option<u64>,
    pub max_calls: Option<u64>,
    pub sigma_stop: Option<f64>,
    /// Stop once `‖∇f(x)‖ ≤ grad_target`. Validation runs only: needs an
    /// analytic gradient, which the search itself never uses.
    pub grad_target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchState {
    pub x: Point,
    pub sigma: f64,
    pub iteration: u64,
    pub oracle_calls: u64,
    pub last_success: bool,
    pub history: Vec<TraceRecord>,
    pub budget_exhausted: bool,
    /// Set by [`minimize`] when the loop ends.
    pub termination: Option<Termination>,
}

impl SearchState {
    pub fn new(x: Point, sigma: f64) -> Self {
        Self {
            x,
            sigma,
            iteration: 0,
            oracle_calls: 0,
            last_success: false,
            history: Vec::new(),
            budget_exhausted: false,
            termination: None,
        }
    }

    pub fn successes(&self) -> usize {
        self.history.iter().filter(|r| r.success).count()
    }
}

/// Outcome of one poll of the spanning set.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub success: bool,
    /// Step size used by the poll.
    pub sigma: f64,
    pub f_current: f64,
    pub f_best: f64,
    pub best_index: usize,
    pub offspring: Point,
}

fn select(values: &[f64], tie: TieBreak) -> usize {
    match tie {
        TieBreak::FirstIndex => {
            let mut best = 0;
            for (i, v) in values.iter().enumerate().skip(1) {
                if *v < values[best] {
                    best = i;
                }
            }
            best
        }
        TieBreak::LowestIndexAmongMin => {
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let tol = 4.0 * f64::EPSILON * min.abs();
            values
                .iter()
                .position(|v| *v <= min + tol)
                .expect("at least one offspring")
        }
    }
}

/// Polls `set` around `state.x` at `state.sigma` without updating the state.
fn poll<O: Objective>(
    state: &mut SearchState,
    set: &SpanningSet,
    oracle: &NoisyOracle<O>,
    cfg: &DsConfig,
    rng: RngStream,
) -> Result<StepOutcome> {
    if set.dim() != oracle.dim() || state.x.dim() != oracle.dim() {
        return Err(Error::InvalidDimension(format!(
            "set has dimension {}, iterate {}, oracle {}",
            set.dim(),
            state.x.dim(),
            oracle.dim()
        )));
    }
    let sigma = state.sigma;
    let per_estimate = oracle.required_samples(sigma)?.samples;
    let planned = per_estimate * (set.len() as u64 + 1);
    if state.iteration >= cfg.max_iterations || state.oracle_calls.saturating_add(planned) > cfg.max_oracle_calls {
        return Err(Error::BudgetExhausted {
            iterations: state.iteration,
            oracle_calls: state.oracle_calls,
        });
    }

    let step_rng = rng.fork(state.iteration);
    let current = oracle.estimate(&state.x, sigma, step_rng.fork(0))?;
    let eval = |(i, d): (usize, &Point)| -> Result<(Point, Estimate)> {
        let xi = state.x.offset(sigma, d);
        let e = oracle.estimate(&xi, sigma, step_rng.fork(i as u64 + 1))?;
        Ok((xi, e))
    };
    let offspring: Vec<(Point, Estimate)> = if planned >= PARALLEL_DRAWS {
        set.directions()
            .par_iter()
            .enumerate()
            .map(eval)
            .collect::<Result<_>>()?
    } else {
        set.directions().iter().enumerate().map(eval).collect::<Result<_>>()?
    };
    let values: Vec<f64> = offspring.iter().map(|(_, e)| e.value).collect();
    let best_index = select(&values, cfg.tie_break);
    let f_best = values[best_index];
    let success = f_best < current.value - cfg.c * sigma * sigma;

    let used = current.samples_used + offspring.iter().map(|(_, e)| e.samples_used).sum::<u64>();
    state.oracle_calls += used;
    let grad_norm = oracle.objective().gradient(&state.x).map(|g| g.norm());
    state.history.push(TraceRecord {
        iteration: state.iteration,
        sigma,
        f_estimate_current: current.value,
        f_estimate_best_offspring: f_best,
        success,
        oracle_calls: state.oracle_calls,
        grad_norm,
    });
    state.iteration += 1;
    state.last_success = success;

    let offspring = offspring
        .into_iter()
        .nth(best_index)
        .map(|(x, _)| x)
        .expect("index in range");
    Ok(StepOutcome {
        success,
        sigma,
        f_current: current.value,
        f_best,
        best_index,
        offspring,
    })
}

/// One iteration of the full loop. On success the iterate moves to the best
/// offspring and `σ ← min(σ_max, γσ)`; otherwise `σ ← σ/γ`. Appends exactly
/// one trace row. A budget overrun returns [`Error::BudgetExhausted`] and
/// leaves the state untouched apart from `budget_exhausted`.
pub fn ds_step<O: Objective>(
    state: &mut SearchState,
    set: &SpanningSet,
    oracle: &NoisyOracle<O>,
    cfg: &DsConfig,
    rng: RngStream,
) -> Result<StepOutcome> {
    let out = match poll(state, set, oracle, cfg, rng) {
        Err(e @ Error::BudgetExhausted { .. }) => {
            state.budget_exhausted = true;
            return Err(e);
        }
        other => other?,
    };
    if out.success {
        state.x = out.offspring.clone();
        state.sigma = (cfg.gamma * state.sigma).min(cfg.sigma_max);
    } else {
        state.sigma /= cfg.gamma;
    }
    Ok(out)
}

/// Runs [`ds_step`] from `x0` until a stopping criterion fires.
///
/// Probabilistic direction pairs are redrawn every iteration; every other kind
/// of set is reused as given.
pub fn minimize<O: Objective>(
    x0: Point,
    set: &SpanningSet,
    oracle: &NoisyOracle<O>,
    cfg: &DsConfig,
    stop: &StoppingRule,
    rng: RngStream,
) -> Result<SearchState> {
    cfg.validate()?;
    let mut state = SearchState::new(x0, cfg.sigma0);
    minimize_from(&mut state, set, oracle, cfg, stop, rng)?;
    Ok(state)
}

/// [`minimize`] continuing from an existing state (its σ and counters).
pub fn minimize_from<O: Objective>(
    state: &mut SearchState,
    set: &SpanningSet,
    oracle: &NoisyOracle<O>,
    cfg: &DsConfig,
    stop: &StoppingRule,
    rng: RngStream,
) -> Result<Termination> {
    let start_iter = state.iteration;
    let start_calls = state.oracle_calls;
    let termination = loop {
        if let Some(target) = stop.grad_target {
            if let Some(g) = oracle.objective().gradient(&state.x) {
                if g.norm() <= target {
                    break Termination::GradTarget;
                }
            }
        }
        if matches!(stop.sigma_stop, Some(s) if state.sigma <= s) {
            break Termination::SigmaStop;
        }
        if state.sigma < DEFAULT_SIGMA_FLOOR {
            break Termination::SigmaFloor;
        }
        if matches!(stop.max_iter, Some(m) if state.iteration - start_iter >= m) {
            break Termination::MaxIterations;
        }
        if matches!(stop.max_calls, Some(m) if state.oracle_calls - start_calls >= m) {
            break Termination::MaxCalls;
        }
        let redrawn;
        let directions = if set.kind() == SpanningKind::ProbabilisticPair {
            redrawn = make_probabilistic_pair(set.dim(), rng.fork2(state.iteration, DIRECTION_TAG))?;
            &redrawn
        } else {
            set
        };
        match ds_step(state, directions, oracle, cfg, rng) {
            Ok(_) => {}
            Err(Error::BudgetExhausted { .. }) => break Termination::BudgetExhausted,
            Err(e) => return Err(e),
        }
    };
    state.termination = Some(termination);
    Ok(termination)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OneStepStatus {
    Success,
    /// σ fell below the floor before any successful trial.
    NoProgress,
    BudgetExhausted,
}

/// Result of [`one_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct OneStep {
    pub status: OneStepStatus,
    /// New iterate on success, the input point otherwise.
    pub x: Point,
    /// On success the step size of the successful trial; on no-progress the
    /// value that fell below the floor.
    pub sigma: f64,
    pub state: SearchState,
}

/// Searches for one successful sufficient-decrease step from `x`.
///
/// The step size is first raised to `min(γ σ_in, σ_max)`, since the previous
/// call ended on a success. Each unsuccessful trial divides it by `γ`; once it
/// drops below `sigma_floor` the search gives up with
/// [`OneStepStatus::NoProgress`], which the caller may read as evidence of
/// approximate stationarity.
#[allow(clippy::too_many_arguments)]
pub fn one_step<O: Objective>(
    x: &Point,
    sigma_in: f64,
    set: &SpanningSet,
    oracle: &NoisyOracle<O>,
    cfg: &DsConfig,
    sigma_floor: f64,
    rng: RngStream,
) -> Result<OneStep> {
    if !(sigma_in > 0.0 && sigma_in.is_finite()) {
        return Err(Error::InvalidStep(sigma_in));
    }
    let mut state = SearchState::new(x.clone(), (cfg.gamma * sigma_in).min(cfg.sigma_max));
    loop {
        if state.sigma < sigma_floor {
            return Ok(OneStep {
                status: OneStepStatus::NoProgress,
                x: x.clone(),
                sigma: state.sigma,
                state,
            });
        }
        let directions;
        let set_k = if set.kind() == SpanningKind::ProbabilisticPair {
            directions = make_probabilistic_pair(set.dim(), rng.fork2(state.iteration, DIRECTION_TAG))?;
            &directions
        } else {
            set
        };
        let out = match poll(&mut state, set_k, oracle, cfg, rng) {
            Ok(out) => out,
            Err(Error::BudgetExhausted { .. }) => {
                state.budget_exhausted = true;
                return Ok(OneStep {
                    status: OneStepStatus::BudgetExhausted,
                    x: x.clone(),
                    sigma: state.sigma,
                    state,
                });
            }
            Err(e) => return Err(e),
        };
        if out.success {
            state.x = out.offspring;
            return Ok(OneStep {
                status: OneStepStatus::Success,
                x: state.x.clone(),
                sigma: out.sigma,
                state,
            });
        }
        state.sigma /= cfg.gamma;
    }
}
