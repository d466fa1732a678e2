//! Noisy function oracles and sample-averaged estimates.
//!
//! A [`NoisyOracle`] wraps a noiseless [`Objective`] with an additive,
//! zero-mean [`NoiseModel`] of variance at most `sigma_f²`. Each estimate at
//! step size `σ` averages enough independent draws to be `ε_f σ²`-accurate
//! with probability `p_f` and to satisfy the `l_f σ⁴` variance condition; see
//! [`required_samples`]. Oracle calls are counted here, in the wrapper, so
//! budgets apply uniformly to every algorithm.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::point::Point;
use crate::rng::RngStream;

/// Probability of a non-zero draw in the spike model.
const SPIKE_PROB: f64 = 0.05;
/// Draws per sub-stream when an estimate is split across threads.
const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    None,
    Gaussian,
    Uniform,
    BernoulliSpike,
}

/// Additive zero-mean noise with variance `sigma_f²`.
///
/// * `gaussian`: `N(0, σ_f²)`.
/// * `uniform`: `U(−√3 σ_f, √3 σ_f)`.
/// * `bernoulli_spike`: `±σ_f/√q` with probability `q/2` each (q = 0.05),
///   zero otherwise. Heavy, rare spikes with the same variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    #[serde(default)]
    pub sigma_f: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::none()
    }
}

impl NoiseModel {
    pub const fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            sigma_f: 0.0,
        }
    }

    pub const fn gaussian(sigma_f: f64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            sigma_f,
        }
    }

    pub const fn uniform(sigma_f: f64) -> Self {
        Self {
            kind: NoiseKind::Uniform,
            sigma_f,
        }
    }

    pub const fn bernoulli_spike(sigma_f: f64) -> Self {
        Self {
            kind: NoiseKind::BernoulliSpike,
            sigma_f,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.kind == NoiseKind::None || self.sigma_f == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_f >= 0.0 && self.sigma_f.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma_f = {}", self.sigma_f)));
        }
        Ok(())
    }

    /// One draw of the additive noise.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let s = self.sigma_f;
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Gaussian => s * rng.sample::<f64, _>(StandardNormal),
            NoiseKind::Uniform => s * 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
            NoiseKind::BernoulliSpike => {
                let u: f64 = rng.random();
                let amp = s / SPIKE_PROB.sqrt();
                if u < 0.5 * SPIKE_PROB {
                    amp
                } else if u < SPIKE_PROB {
                    -amp
                } else {
                    0.0
                }
            }
        }
    }
}

/// Accuracy requirements for the estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AccuracyConfig {
    /// Estimates should be within `eps_f σ²` of the truth.
    pub eps_f: f64,
    /// ... with probability at least `p_f`.
    pub p_f: f64,
    /// Variance condition constant: `E|F − f|² ≤ l_f² σ⁴`.
    pub l_f: f64,
    /// Constant multiplying the concentration term of the sample-size rule.
    pub c0: f64,
    /// Hard cap on draws per estimate.
    pub n_max: u64,
}

impl Default for AccuracyConfig {
    fn default() -> Self {
        Self {
            eps_f: 1.0,
            p_f: 0.9,
            l_f: 1.0,
            c0: 2.0,
            n_max: 1_000_000,
        }
    }
}

impl AccuracyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_f > 0.5 && self.p_f < 1.0) {
            return Err(Error::InvalidProbability(self.p_f));
        }
        for (name, v) in [("eps_f", self.eps_f), ("l_f", self.l_f), ("c0", self.c0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be > 0")));
            }
        }
        if self.n_max == 0 {
            return Err(Error::InvalidParameter("n_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of the sample-size rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleCount {
    pub samples: u64,
    /// The rule asked for more than `n_max` draws.
    pub capped: bool,
}

/// Draws needed for one estimate at step size `sigma`:
///
/// `max(⌈c0 σ_f² log(1/(1−p_f)) / (ε_f² σ⁴)⌉, ⌈σ_f² / (l_f² σ⁴)⌉, 1)`, capped at
/// `n_max`. The second term makes the variance of the mean, `σ_f²/N`, at most
/// `l_f² σ⁴`.
pub fn required_samples(acc: &AccuracyConfig, noise: &NoiseModel, sigma: f64) -> Result<SampleCount> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidStep(sigma));
    }
    if noise.is_noiseless() {
        return Ok(SampleCount {
            samples: 1,
            capped: false,
        });
    }
    let var = noise.sigma_f * noise.sigma_f;
    let s4 = sigma.powi(4);
    let accuracy = acc.c0 * var / (acc.eps_f * acc.eps_f * s4) * (1.0 / (1.0 - acc.p_f)).ln();
    let variance = var / (acc.l_f * acc.l_f * s4);
    let want = accuracy.max(variance).ceil().max(1.0);
    if want > acc.n_max as f64 {
        Ok(SampleCount {
            samples: acc.n_max,
            capped: true,
        })
    } else {
        Ok(SampleCount {
            samples: want as u64,
            capped: false,
        })
    }
}

/// An averaged function estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub samples_used: u64,
    pub sigma_at_request: f64,
    /// The sample-size rule hit `n_max`; accuracy is not guaranteed.
    pub capped: bool,
}

/// An objective observed through additive noise, with call counting.
pub struct NoisyOracle<O> {
    objective: O,
    noise: NoiseModel,
    accuracy: AccuracyConfig,
    calls: AtomicU64,
}

impl<O: Objective> NoisyOracle<O> {
    pub fn new(objective: O, noise: NoiseModel, accuracy: AccuracyConfig) -> Self {
        Self {
            objective,
            noise,
            accuracy,
            calls: AtomicU64::new(0),
        }
    }

    /// Exact evaluations, one call each.
    pub fn noiseless(objective: O) -> Self {
        Self::new(objective, NoiseModel::none(), AccuracyConfig::default())
    }

    pub fn objective(&self) -> &O {
        &self.objective
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn accuracy(&self) -> &AccuracyConfig {
        &self.accuracy
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    /// Total draws served so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn required_samples(&self, sigma: f64) -> Result<SampleCount> {
        required_samples(&self.accuracy, &self.noise, sigma)
    }

    /// One raw draw `f̃(x, ξ)`.
    pub fn sample<R: Rng + ?Sized>(&self, x: &Point, rng: &mut R) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let v = self.objective.value(x) + self.noise.draw(rng);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation(format!("non-finite draw {v}")))
        }
    }

    /// Mean of [`required_samples`] independent draws at `x`.
    ///
    /// Draws are split into fixed-size chunks, each on its own sub-stream of
    /// `rng`, and chunk sums are added in chunk order, so the result does not
    /// depend on how chunks are scheduled across threads.
    pub fn estimate(&self, x: &Point, sigma: f64, rng: RngStream) -> Result<Estimate> {
        let count = self.required_samples(sigma)?;
        let n = count.samples;
        let f = self.objective.value(x);
        if !f.is_finite() {
            self.calls.fetch_add(1, Ordering::Relaxed);
            return Err(Error::Evaluation(format!("non-finite value {f}")));
        }
        let value = if self.noise.is_noiseless() {
            self.calls.fetch_add(1, Ordering::Relaxed);
            f
        } else {
            let chunks = n.div_ceil(CHUNK);
            let chunk_sum = |c: u64| {
                let mut r = rng.fork(c).rng();
                let len = CHUNK.min(n - c * CHUNK);
                (0..len).map(|_| self.noise.draw(&mut r)).sum::<f64>()
            };
            let sums: Vec<f64> = if chunks > 1 {
                (0..chunks).into_par_iter().map(chunk_sum).collect()
            } else {
                vec![chunk_sum(0)]
            };
            self.calls.fetch_add(n, Ordering::Relaxed);
            f + sums.iter().sum::<f64>() / n as f64
        };
        if !value.is_finite() {
            return Err(Error::Evaluation(format!("non-finite estimate {value}")));
        }
        Ok(Estimate {
            value,
            samples_used: n,
            sigma_at_request: sigma,
            capped: count.capped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::FnObjective;

    fn cfg() -> AccuracyConfig {
        AccuracyConfig {
            eps_f: 1.0,
            p_f: 0.9,
            l_f: 1.0,
            c0: 1.0,
            n_max: 1_000_000,
        }
    }

    #[test]
    fn noiseless_needs_one_sample() {
        let c = required_samples(&cfg(), &NoiseModel::gaussian(0.0), 1e-3).unwrap();
        assert_eq!(c.samples, 1);
        let c = required_samples(&cfg(), &NoiseModel::none(), 1e-3).unwrap();
        assert_eq!(c.samples, 1);
    }

    #[test]
    fn sample_rule_arithmetic() {
        // max(ceil(ln 10), 1) = 3
        let c = required_samples(&cfg(), &NoiseModel::gaussian(1.0), 1.0).unwrap();
        assert_eq!(c.samples, 3);
        // σ = 1/2 scales both terms by 16: ceil(16 ln 10) = 37
        let c = required_samples(&cfg(), &NoiseModel::gaussian(1.0), 0.5).unwrap();
        assert_eq!(c.samples, (16.0 * 10f64.ln()).ceil() as u64);
        assert_eq!(c.samples, 37);
    }

    #[test]
    fn sample_rule_cap_and_errors() {
        let mut a = cfg();
        a.n_max = 100;
        let c = required_samples(&a, &NoiseModel::gaussian(1.0), 0.01).unwrap();
        assert_eq!(
            c,
            SampleCount {
                samples: 100,
                capped: true
            }
        );
        assert!(matches!(
            required_samples(&a, &NoiseModel::gaussian(1.0), 0.0),
            Err(Error::InvalidStep(_))
        ));
        assert!(required_samples(&a, &NoiseModel::gaussian(1.0), -1.0).is_err());
    }

    #[test]
    fn variance_term_dominates_for_small_l_f() {
        let mut a = cfg();
        a.l_f = 0.1;
        let c = required_samples(&a, &NoiseModel::gaussian(1.0), 1.0).unwrap();
        assert_eq!(c.samples, 100);
    }

    #[test]
    fn noiseless_estimate_is_exact() {
        let f = FnObjective::new(2, |x: &Point| x.norm_sq());
        let o = NoisyOracle::noiseless(f);
        let e = o.estimate(&Point::from([1.0, 1.0]), 0.1, RngStream::new(0, 0)).unwrap();
        assert_eq!(e.value, 2.0);
        assert_eq!(e.samples_used, 1);
        assert_eq!(o.calls(), 1);
    }

    #[test]
    fn estimates_are_deterministic_and_counted() {
        let f = FnObjective::new(1, |x: &Point| x[0]);
        let o = NoisyOracle::new(f, NoiseModel::gaussian(1.0), cfg());
        let x = Point::from([0.3]);
        // Large enough to be split across several chunks.
        let a = o.estimate(&x, 0.05, RngStream::new(4, 2)).unwrap();
        let b = o.estimate(&x, 0.05, RngStream::new(4, 2)).unwrap();
        assert_eq!(a, b);
        assert!(a.samples_used > CHUNK);
        assert_eq!(o.calls(), 2 * a.samples_used);
    }

    #[test]
    fn noise_models_are_centred_with_target_variance() {
        for noise in [
            NoiseModel::gaussian(2.0),
            NoiseModel::uniform(2.0),
            NoiseModel::bernoulli_spike(2.0),
        ] {
            let mut r = RngStream::new(1, 9).rng();
            let n = 400_000;
            let draws: Vec<f64> = (0..n).map(|_| noise.draw(&mut r)).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| d * d).sum::<f64>() / n as f64;
            assert!(mean.abs() < 0.03, "{noise:?}: mean {mean}");
            assert!((var - 4.0).abs() < 0.15, "{noise:?}: var {var}");
        }
    }

    #[test]
    fn non_finite_values_are_errors() {
        let f = FnObjective::new(1, |_: &Point| f64::INFINITY);
        let o = NoisyOracle::noiseless(f);
        assert!(matches!(
            o.estimate(&Point::from([0.0]), 1.0, RngStream::new(0, 0)),
            Err(Error::Evaluation(_))
        ));
    }

    #[test]
    fn accuracy_config_validation() {
        assert!(cfg().validate().is_ok());
        let mut a = cfg();
        a.p_f = 0.5;
        assert!(matches!(a.validate(), Err(Error::InvalidProbability(_))));
        a = cfg();
        a.eps_f = 0.0;
        assert!(a.validate().is_err());
    }
}
