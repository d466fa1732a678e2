//! Sequential min-max direct search.
//!
//! Every outer iteration first solves the inner problem `max_y f(x, y)` with
//! the full direct-search loop, then takes one successful sufficient-decrease
//! step for the min player with [`one_step`]. The inner tolerance `ε^max` is
//! either derived from the game's smoothness constants or fixed by the user.

use serde::{Deserialize, Serialize};

use crate::direct_search::{ds_step, one_step, DsConfig, OneStepStatus, SearchState, TieBreak};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::point::Point;
use crate::problems::{BlockConstants, Game};
use crate::rng::RngStream;
use crate::spanning::{self, SpanningKind, SpanningSet};
use crate::stochastic::{AccuracyConfig, NoiseModel, NoisyOracle};
use crate::theory::{walk_confinement_k, WalkConfig};
use crate::trace::{Phase, PhasedRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InnerToleranceMode {
    #[default]
    TheoryDriven,
    Fixed,
}

/// How the inner solve decides it has reached `‖∇_y f‖ ≤ ε^max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InnerStop {
    /// Analytic gradient: stop at `‖∇_y f‖ ≤ ε^max / 2`.
    Gradient,
    /// Step size: stop after an unsuccessful step with `σ ≤ C_y ε^max / 2`,
    /// which bounds the gradient through the unsuccessful-step lemma.
    #[default]
    StepSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinMaxConfig {
    pub c_x: f64,
    pub c_y: f64,
    /// Net-decrease constant; `None` picks `(c_x − D₁)/2`.
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub gamma: f64,
    pub sigma0_x: f64,
    pub sigma0_y: f64,
    pub sigma_max_x: f64,
    pub sigma_max_y: f64,
    pub eps_target: f64,
    pub inner_tolerance_mode: InnerToleranceMode,
    /// Used in fixed mode; `None` means `eps_target / 10`.
    pub eps_max_fixed: Option<f64>,
    #[serde(rename = "T_outer_max")]
    pub t_outer_max: u64,
    pub inner_stop: InnerStop,
    pub inner_max_iter: u64,
    /// Confinement probability used to pick the walk bound in noisy runs.
    pub walk_delta: f64,
    pub spanning_x: SpanningKind,
    pub spanning_y: SpanningKind,
    pub tie_break: TieBreak,
}

impl Default for MinMaxConfig {
    fn default() -> Self {
        Self {
            c_x: 2.0,
            c_y: 0.5,
            k: None,
            gamma: 2.0,
            sigma0_x: 0.5,
            sigma0_y: 0.5,
            sigma_max_x: 1.0,
            sigma_max_y: 10.0,
            eps_target: 1e-3,
            inner_tolerance_mode: InnerToleranceMode::TheoryDriven,
            eps_max_fixed: None,
            t_outer_max: 10_000,
            inner_stop: InnerStop::StepSize,
            inner_max_iter: 1_000_000,
            walk_delta: 0.9,
            spanning_x: SpanningKind::OrthonormalPm,
            spanning_y: SpanningKind::OrthonormalPm,
            tie_break: TieBreak::default(),
        }
    }
}

impl MinMaxConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("c_x", self.c_x),
            ("c_y", self.c_y),
            ("sigma0_x", self.sigma0_x),
            ("sigma0_y", self.sigma0_y),
            ("sigma_max_x", self.sigma_max_x),
            ("sigma_max_y", self.sigma_max_y),
            ("eps_target", self.eps_target),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be > 0")));
            }
        }
        if !(self.gamma > 1.0) {
            return Err(Error::InvalidParameter(format!("gamma = {} must be > 1", self.gamma)));
        }
        if let Some(k) = self.k {
            if !(k > 0.0) {
                return Err(Error::InvalidParameter(format!("K = {k} must be > 0")));
            }
        }
        if let Some(e) = self.eps_max_fixed {
            if !(e > 0.0) {
                return Err(Error::InvalidParameter(format!("eps_max_fixed = {e} must be > 0")));
            }
        }
        if !(self.walk_delta > 0.0 && self.walk_delta < 1.0) {
            return Err(Error::InvalidProbability(self.walk_delta));
        }
        Ok(())
    }

    fn ds_x(&self) -> DsConfig {
        DsConfig {
            c: self.c_x,
            gamma: self.gamma,
            sigma0: self.sigma0_x,
            sigma_max: self.sigma_max_x,
            max_iterations: u64::MAX,
            max_oracle_calls: u64::MAX,
            tie_break: self.tie_break,
        }
    }

    fn ds_y(&self) -> DsConfig {
        DsConfig {
            c: self.c_y,
            gamma: self.gamma,
            sigma0: self.sigma0_y,
            sigma_max: self.sigma_max_y,
            max_iterations: u64::MAX,
            max_oracle_calls: u64::MAX,
            tie_break: self.tie_break,
        }
    }
}

/// Coupling constants of a game for a given pair of player configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameConstants {
    pub l11: f64,
    pub l12: f64,
    pub l21: f64,
    pub l22: f64,
    pub mu: f64,
    pub l_xy: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    /// Unsuccessful-step constant of the min player.
    pub c_min: f64,
    /// Unsuccessful-step constant of the max player.
    pub c_max: f64,
    /// Accuracy `ε_f` of the min player's estimates (0 when noiseless).
    pub eps_x: f64,
}

impl GameConstants {
    pub fn derive(
        block: &BlockConstants,
        c_x: f64,
        c_y: f64,
        kappa_x: f64,
        kappa_y: f64,
        eps_x: f64,
        eps_y: f64,
    ) -> Result<Self> {
        if !(block.mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "PL constant mu = {} must be > 0",
                block.mu
            )));
        }
        let BlockConstants { l11, l12, l21, l22, mu } = *block;
        let l_xy = l12 / (2.0 * mu);
        Ok(Self {
            l11,
            l12,
            l21,
            l22,
            mu,
            l_xy,
            d1: l12 * l_xy + 0.5 * l22 * l_xy * l_xy,
            d2: l12 / mu + l_xy + l22 * l_xy / mu,
            d3: (1.0 + l22 / (2.0 * mu)) / mu,
            c_min: 2.0 * kappa_x / (l11 + 2.0 * c_x + 4.0 * eps_x),
            c_max: 2.0 * kappa_y / (l22 + 2.0 * c_y + 4.0 * eps_y),
            eps_x,
        })
    }

    /// Constants for `game` with the spanning sets and accuracies of `cfg`.
    pub fn for_game<G: Game + ?Sized>(game: &G, cfg: &MinMaxConfig, setup: &PlayerNoise) -> Result<Self> {
        let block = game
            .constants()
            .ok_or_else(|| Error::InfeasibleConstants("game exposes no smoothness constants".into()))?;
        let kx = spanning::make(cfg.spanning_x, game.dim_x(), RngStream::new(0, 0))?.kappa_lower();
        let ky = spanning::make(cfg.spanning_y, game.dim_y(), RngStream::new(0, 0))?.kappa_lower();
        Self::derive(&block, cfg.c_x, cfg.c_y, kx, ky, setup.eps_x(), setup.eps_y())
    }

    /// `K` from the config, or `(c_x − D₁)/2` raised above `2ε_x` if needed.
    pub fn resolve_k(&self, cfg: &MinMaxConfig) -> Result<f64> {
        let k = match cfg.k {
            Some(k) => k,
            None => {
                let mid = 0.5 * (cfg.c_x - self.d1);
                if mid > 2.0 * self.eps_x {
                    mid
                } else {
                    2.0 * self.eps_x + 0.5 * (cfg.c_x - self.d1 - 2.0 * self.eps_x)
                }
            }
        };
        if cfg.c_x <= k + self.d1 {
            return Err(Error::InfeasibleConstants(format!(
                "c_x > K + D1 fails: {} <= {} + {}",
                cfg.c_x, k, self.d1
            )));
        }
        if self.eps_x > 0.0 && k <= 2.0 * self.eps_x {
            return Err(Error::InfeasibleConstants(format!(
                "K > 2 eps_x fails: {k} <= {}",
                2.0 * self.eps_x
            )));
        }
        Ok(k)
    }
}

/// Largest inner tolerance keeping the outer net decrease below `−K σ²`.
pub fn derive_inner_tolerance(gc: &GameConstants, cfg: &MinMaxConfig, k_walk: u32) -> Result<f64> {
    if !(cfg.eps_target > 0.0) {
        return Err(Error::InvalidParameter(format!("eps_target = {}", cfg.eps_target)));
    }
    let k = gc.resolve_k(cfg)?;
    let slack = cfg.c_x - k - gc.d1;
    let scale = cfg.gamma.powi(k_walk as i32);
    let c = gc.c_min;
    let first = if gc.d2 > 0.0 {
        2.0 * c * slack / (scale * gc.d2)
    } else {
        f64::INFINITY
    };
    let second = c * (-gc.d2 + (gc.d2 * gc.d2 + 4.0 * slack * gc.d3).sqrt()) / (2.0 * gc.d3 * scale);
    Ok(cfg.eps_target * first.min(second))
}

/// `(‖∇_x f(x, y)‖, ‖∇_y f(x, y)‖)`.
pub fn fne_residual<G: Game + ?Sized>(game: &G, x: &Point, y: &Point) -> (f64, f64) {
    (game.grad_x(x, y).norm(), game.grad_y(x, y).norm())
}

/// Noise and accuracy for each player.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlayerNoise {
    pub noise_x: NoiseModel,
    pub accuracy_x: AccuracyConfig,
    pub noise_y: NoiseModel,
    pub accuracy_y: AccuracyConfig,
}

impl PlayerNoise {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn same(noise: NoiseModel, accuracy: AccuracyConfig) -> Self {
        Self {
            noise_x: noise,
            accuracy_x: accuracy,
            noise_y: noise,
            accuracy_y: accuracy,
        }
    }

    fn eps_x(&self) -> f64 {
        if self.noise_x.is_noiseless() {
            0.0
        } else {
            self.accuracy_x.eps_f
        }
    }

    fn eps_y(&self) -> f64 {
        if self.noise_y.is_noiseless() {
            0.0
        } else {
            self.accuracy_y.eps_f
        }
    }

    fn is_noiseless(&self) -> bool {
        self.noise_x.is_noiseless() && self.noise_y.is_noiseless()
    }
}

/// Summary of one outer iteration `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuterRecord {
    pub t: u64,
    /// `x_t` after the min step.
    pub x: Point,
    /// `y_t` returned by the inner solve.
    pub y: Point,
    /// Min-player step size `σ_t` (the successful trial's, or the value that
    /// fell below the floor).
    pub sigma_x: f64,
    pub min_status: OneStepStatus,
    pub inner_iterations: u64,
    pub inner_met: bool,
    /// `f(x_{t−1}, y_t)`.
    pub f_after_inner: f64,
    /// `f(x_t, y_t)`.
    pub f_after_min: f64,
    /// `‖∇_y f(x_{t−1}, y_t)‖`.
    pub inner_grad_norm: f64,
    /// `‖y_t − y*(x_{t−1})‖` when the inner maximizer is known.
    pub inner_gap: Option<f64>,
    pub oracle_calls: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxResult {
    pub x: Point,
    pub y: Point,
    pub converged: bool,
    pub eps_max: f64,
    /// Net-decrease constant in force (`None` in fixed mode without constants).
    pub k: Option<f64>,
    pub k_walk: u32,
    pub outer: Vec<OuterRecord>,
    pub trace: Vec<PhasedRecord>,
    pub oracle_calls: u64,
}

fn tag(t: u64, phase: Phase, state: &SearchState, out: &mut Vec<PhasedRecord>) {
    out.extend(state.history.iter().map(|r| PhasedRecord {
        t,
        phase,
        record: r.clone(),
    }));
}

/// Runs the sequential min-max loop from `(x0, y0)`.
///
/// Returns with `converged = true` once the min player makes no progress
/// above its step floor right after an inner solve that met its tolerance.
/// Running out of outer iterations is not an error; the last iterates are
/// returned with `converged = false`.
#[allow(clippy::too_many_arguments)]
pub fn solve<G: Game + ?Sized>(
    game: &G,
    x0: Point,
    y0: Point,
    gc: Option<&GameConstants>,
    cfg: &MinMaxConfig,
    noise: &PlayerNoise,
    rng: RngStream,
) -> Result<MinMaxResult> {
    cfg.validate()?;
    if x0.dim() != game.dim_x() || y0.dim() != game.dim_y() {
        return Err(Error::InvalidDimension(format!(
            "start ({}, {}) for a game of dimension ({}, {})",
            x0.dim(),
            y0.dim(),
            game.dim_x(),
            game.dim_y()
        )));
    }
    let k_walk = if noise.is_noiseless() {
        0
    } else {
        walk_confinement_k(&WalkConfig {
            p_f: noise.accuracy_x.p_f,
            n: cfg.t_outer_max.max(1),
            delta: cfg.walk_delta,
        })?
    };
    let (eps_max, k) = match (cfg.inner_tolerance_mode, gc) {
        (InnerToleranceMode::TheoryDriven, Some(gc)) => {
            (derive_inner_tolerance(gc, cfg, k_walk)?, Some(gc.resolve_k(cfg)?))
        }
        (InnerToleranceMode::TheoryDriven, None) => {
            return Err(Error::InfeasibleConstants(
                "theory-driven inner tolerance needs game constants".into(),
            ))
        }
        (InnerToleranceMode::Fixed, gc) => (
            cfg.eps_max_fixed.unwrap_or(cfg.eps_target / 10.0),
            gc.and_then(|g| g.resolve_k(cfg).ok()),
        ),
    };
    let sigma_floor_x = gc.map_or(cfg.eps_target, |g| g.c_min * cfg.eps_target);
    let inner_sigma_stop = gc.map_or(eps_max / 2.0, |g| g.c_max * eps_max / 2.0);

    let set_x = spanning::make(cfg.spanning_x, game.dim_x(), rng.fork2(u64::MAX, 0))?;
    let set_y = spanning::make(cfg.spanning_y, game.dim_y(), rng.fork2(u64::MAX, 1))?;
    let ds_x = cfg.ds_x();
    let ds_y = cfg.ds_y();

    let mut x = x0;
    let mut y = y0;
    let mut sigma_x = cfg.sigma0_x / cfg.gamma;
    let mut sigma_y = cfg.sigma0_y;
    let mut outer = Vec::new();
    let mut trace = Vec::new();
    let mut calls = 0u64;
    let mut converged = false;

    for t in 1..=cfg.t_outer_max {
        // Inner maximization on −f(x_{t−1}, ·).
        let slice = game.max_slice(&x);
        let oracle_y = NoisyOracle::new(&*slice, noise.noise_y, noise.accuracy_y);
        let mut state = SearchState::new(y.clone(), sigma_y);
        let inner_rng = rng.fork2(t, 0);
        let mut met = false;
        let mut last_success_sigma = None;
        loop {
            let done = match cfg.inner_stop {
                InnerStop::Gradient => game.grad_y(&x, &state.x).norm() <= eps_max / 2.0,
                InnerStop::StepSize => state
                    .history
                    .last()
                    .is_some_and(|r| !r.success && r.sigma <= inner_sigma_stop),
            };
            if done {
                met = true;
                break;
            }
            if state.iteration >= cfg.inner_max_iter {
                break;
            }
            let step = set_y_for(&set_y, inner_rng, state.iteration)?;
            let out = ds_step(&mut state, &step, &oracle_y, &ds_y, inner_rng)?;
            if out.success {
                last_success_sigma = Some(out.sigma);
            }
        }
        if let Some(s) = last_success_sigma {
            sigma_y = s;
        }
        calls += state.oracle_calls;
        let inner_iterations = state.iteration;
        tag(t, Phase::Max, &state, &mut trace);
        y = state.x;
        let f_after_inner = game.value(&x, &y);
        let inner_grad_norm = game.grad_y(&x, &y).norm();
        let inner_gap = game.inner_argmax(&x).map(|ys| ys.distance(&y));

        // One successful step on f(·, y_t).
        let min_slice = game.min_slice(&y);
        let oracle_x = NoisyOracle::new(&*min_slice, noise.noise_x, noise.accuracy_x);
        let step = one_step(&x, sigma_x, &set_x, &oracle_x, &ds_x, sigma_floor_x, rng.fork2(t, 1))?;
        calls += step.state.oracle_calls;
        tag(t, Phase::Min, &step.state, &mut trace);
        sigma_x = step.sigma;
        x = step.x;
        outer.push(OuterRecord {
            t,
            x: x.clone(),
            y: y.clone(),
            sigma_x,
            min_status: step.status,
            inner_iterations,
            inner_met: met,
            f_after_inner,
            f_after_min: game.value(&x, &y),
            inner_grad_norm,
            inner_gap,
            oracle_calls: calls,
        });
        match step.status {
            OneStepStatus::NoProgress if met => {
                converged = true;
                break;
            }
            OneStepStatus::NoProgress => {
                // Restart the min player from its floor on the next round.
                sigma_x = sigma_floor_x;
            }
            OneStepStatus::BudgetExhausted => break,
            OneStepStatus::Success => {}
        }
    }

    Ok(MinMaxResult {
        x,
        y,
        converged,
        eps_max,
        k,
        k_walk,
        outer,
        trace,
        oracle_calls: calls,
    })
}

fn set_y_for(set: &SpanningSet, rng: RngStream, iteration: u64) -> Result<SpanningSet> {
    if set.kind() == SpanningKind::ProbabilisticPair {
        spanning::make_probabilistic_pair(set.dim(), rng.fork2(iteration, 1 << 40))
    } else {
        Ok(set.clone())
    }
}

/// Inner maximization of the min-max loop run on its own: maximizes
/// `f(x, ·)` from `y0` until the configured tolerance is met.
pub fn inner_solve<G: Game + ?Sized>(
    game: &G,
    x: &Point,
    y0: Point,
    eps_max: f64,
    gc: Option<&GameConstants>,
    cfg: &MinMaxConfig,
    rng: RngStream,
) -> Result<SearchState> {
    let slice = game.max_slice(x);
    let oracle: NoisyOracle<&dyn Objective> = NoisyOracle::noiseless(&*slice);
    let set = spanning::make(cfg.spanning_y, game.dim_y(), rng.fork2(u64::MAX, 1))?;
    let stop = gc.map_or(eps_max / 2.0, |g| g.c_max * eps_max / 2.0);
    let mut state = SearchState::new(y0, cfg.sigma0_y);
    while state.iteration < cfg.inner_max_iter {
        let done = match cfg.inner_stop {
            InnerStop::Gradient => game.grad_y(x, &state.x).norm() <= eps_max / 2.0,
            InnerStop::StepSize => state.history.last().is_some_and(|r| !r.success && r.sigma <= stop),
        };
        if done {
            return Ok(state);
        }
        let step = set_y_for(&set, rng, state.iteration)?;
        ds_step(&mut state, &step, &oracle, &cfg.ds_y(), rng)?;
    }
    Ok(state)
}
