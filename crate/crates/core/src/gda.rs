//! Gradient descent-ascent baseline.
//!
//! Trace rows reuse the direct-search schema with phase `gda`: `k` is the
//! epoch, `sigma` holds `η_x`, `f_est`/`f_best` hold `f(x, y)` before and
//! after the epoch, and `grad_norm` is the joint residual
//! `‖(∇_x f, ∇_y f)‖` after the epoch. Calls count gradient evaluations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minmax::fne_residual;
use crate::point::Point;
use crate::problems::Game;
use crate::trace::{Phase, PhasedRecord, TraceRecord};

/// Learning rates tried by [`gda_grid`].
pub const ETA_GRID: [f64; 6] = [0.1, 0.05, 0.01, 0.005, 0.001, 0.0005];

const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GdaMode {
    /// `inner_steps_y` ascent steps on `y`, then one descent step on `x`.
    #[default]
    Alternating,
    /// One step for each player from the same `(x, y)`.
    Simultaneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GdaConfig {
    pub eta_x: f64,
    pub eta_y: f64,
    pub mode: GdaMode,
    /// Ignored in simultaneous mode.
    pub inner_steps_y: u32,
    pub max_epochs: u64,
    /// Stop before an epoch that would exceed this many gradient calls.
    pub max_gradient_calls: Option<u64>,
}

impl Default for GdaConfig {
    fn default() -> Self {
        Self {
            eta_x: 0.01,
            eta_y: 0.01,
            mode: GdaMode::Alternating,
            inner_steps_y: 1,
            max_epochs: 1000,
            max_gradient_calls: None,
        }
    }
}

impl GdaConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta_x", self.eta_x), ("eta_y", self.eta_y)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be > 0")));
            }
        }
        if self.inner_steps_y == 0 {
            return Err(Error::InvalidParameter("inner_steps_y must be >= 1".into()));
        }
        Ok(())
    }

    fn calls_per_epoch(&self) -> u64 {
        match self.mode {
            GdaMode::Alternating => u64::from(self.inner_steps_y) + 1,
            GdaMode::Simultaneous => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdaResult {
    pub x: Point,
    pub y: Point,
    pub epochs: u64,
    pub gradient_calls: u64,
    /// `fne_residual` after each epoch.
    pub residuals: Vec<(f64, f64)>,
    pub trace: Vec<PhasedRecord>,
}

fn joint_norm(x: &Point, y: &Point) -> f64 {
    (x.norm_sq() + y.norm_sq()).sqrt()
}

pub fn gda_solve<G: Game + ?Sized>(game: &G, x0: Point, y0: Point, cfg: &GdaConfig) -> Result<GdaResult> {
    cfg.validate()?;
    let mut x = x0;
    let mut y = y0;
    let mut calls = 0u64;
    let mut residuals = Vec::new();
    let mut trace = Vec::new();
    let mut epoch = 0;
    while epoch < cfg.max_epochs {
        if matches!(cfg.max_gradient_calls, Some(b) if calls + cfg.calls_per_epoch() > b) {
            break;
        }
        let before = game.value(&x, &y);
        match cfg.mode {
            GdaMode::Alternating => {
                for _ in 0..cfg.inner_steps_y {
                    y = y.offset(cfg.eta_y, &game.grad_y(&x, &y));
                }
                x = x.offset(-cfg.eta_x, &game.grad_x(&x, &y));
            }
            GdaMode::Simultaneous => {
                let gx = game.grad_x(&x, &y);
                let gy = game.grad_y(&x, &y);
                x = x.offset(-cfg.eta_x, &gx);
                y = y.offset(cfg.eta_y, &gy);
            }
        }
        calls += cfg.calls_per_epoch();
        epoch += 1;
        let norm = joint_norm(&x, &y);
        if !(norm <= DIVERGENCE_NORM) {
            return Err(Error::Diverged {
                epoch: epoch as usize,
                norm,
            });
        }
        let r = fne_residual(game, &x, &y);
        residuals.push(r);
        trace.push(PhasedRecord {
            t: 0,
            phase: Phase::Gda,
            record: TraceRecord {
                iteration: epoch,
                sigma: cfg.eta_x,
                f_estimate_current: before,
                f_estimate_best_offspring: game.value(&x, &y),
                success: true,
                oracle_calls: calls,
                grad_norm: Some(r.0.hypot(r.1)),
            },
        });
    }
    Ok(GdaResult {
        x,
        y,
        epochs: epoch,
        gradient_calls: calls,
        residuals,
        trace,
    })
}

/// One grid entry: the learning rate (used for both players) and its run.
#[derive(Debug)]
pub struct GridRun {
    pub eta: f64,
    pub result: Result<GdaResult>,
    /// `score(result)`, `+∞` for diverged runs.
    pub score: f64,
}

/// Runs [`gda_solve`] for every `η` in `etas` (both players) in parallel and
/// scores each run; the best run has the lowest score.
pub fn gda_grid<G, S>(game: &G, x0: &Point, y0: &Point, base: &GdaConfig, etas: &[f64], score: S) -> Vec<GridRun>
where
    G: Game + ?Sized,
    S: Fn(&GdaResult) -> f64 + Sync,
{
    etas.par_iter()
        .map(|&eta| {
            let cfg = GdaConfig {
                eta_x: eta,
                eta_y: eta,
                ..*base
            };
            let result = gda_solve(game, x0.clone(), y0.clone(), &cfg);
            let score = result.as_ref().map_or(f64::INFINITY, &score);
            GridRun { eta, result, score }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{bilinear, decoupled, quadratic_saddle};

    #[test]
    fn simultaneous_first_step() {
        let g = quadratic_saddle();
        let cfg = GdaConfig {
            eta_x: 0.1,
            eta_y: 0.1,
            mode: GdaMode::Simultaneous,
            max_epochs: 1,
            ..GdaConfig::default()
        };
        let r = gda_solve(&g, Point::from([1.0]), Point::from([1.0]), &cfg).unwrap();
        assert!((r.x[0] - 0.8).abs() < 1e-15);
        assert_eq!(r.y[0], 1.0);
        assert_eq!(r.gradient_calls, 2);
        assert_eq!(r.trace[0].phase, Phase::Gda);
    }

    #[test]
    fn decoupled_converges_geometrically() {
        let g = decoupled();
        for mode in [GdaMode::Alternating, GdaMode::Simultaneous] {
            let cfg = GdaConfig {
                eta_x: 0.1,
                eta_y: 0.1,
                mode,
                max_epochs: 50,
                ..GdaConfig::default()
            };
            let r = gda_solve(&g, Point::from([1.0]), Point::from([-2.0]), &cfg).unwrap();
            // Each coordinate contracts by 1 − 2η = 0.8 per epoch.
            assert!((r.x[0] - 0.8_f64.powi(50)).abs() < 1e-12);
            assert!((r.y[0] + 2.0 * 0.8_f64.powi(50)).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_simultaneous_does_not_converge() {
        let cfg = GdaConfig {
            eta_x: 0.1,
            eta_y: 0.1,
            mode: GdaMode::Simultaneous,
            max_epochs: 100,
            ..GdaConfig::default()
        };
        let r = gda_solve(&bilinear(), Point::from([1.0]), Point::from([1.0]), &cfg).unwrap();
        let norm = |(a, b): (f64, f64)| a.hypot(b);
        assert!(norm(r.residuals[99]) >= norm(r.residuals[0]));
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = GdaConfig {
            eta_x: 10.0,
            eta_y: 10.0,
            mode: GdaMode::Simultaneous,
            max_epochs: 1000,
            ..GdaConfig::default()
        };
        let err = gda_solve(&bilinear(), Point::from([1.0]), Point::from([1.0]), &cfg).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
    }

    #[test]
    fn call_budget_is_respected() {
        let cfg = GdaConfig {
            inner_steps_y: 4,
            max_epochs: 1000,
            max_gradient_calls: Some(23),
            ..GdaConfig::default()
        };
        let r = gda_solve(&quadratic_saddle(), Point::from([1.0]), Point::from([1.0]), &cfg).unwrap();
        assert_eq!(r.gradient_calls, 20);
        assert_eq!(r.epochs, 4);
    }
}
