//! The objective abstraction shared by every algorithm.
//!
//! An [`Objective`] is the noiseless mean function `f(x) = E[f̃(x, ξ)]`. Noise
//! is layered on top by [`crate::stochastic::NoisyOracle`], which is also where
//! oracle calls are counted. Gradients and smoothness constants are optional
//! metadata consumed by baselines and validators; the direct-search engines
//! never read them.

use crate::error::{Error, Result};
use crate::point::Point;

pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    /// Noiseless value `f(x)`.
    fn value(&self, x: &Point) -> f64;

    /// Exact gradient of the noiseless mean, when known.
    fn gradient(&self, _x: &Point) -> Option<Point> {
        None
    }

    /// Lipschitz constant of the gradient, when known.
    fn lipschitz_grad(&self) -> Option<f64> {
        None
    }

    /// Polyak-Łojasiewicz constant, when known.
    fn pl_constant(&self) -> Option<f64> {
        None
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &Point) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &Point) -> Option<Point> {
        (**self).gradient(x)
    }
    fn lipschitz_grad(&self) -> Option<f64> {
        (**self).lipschitz_grad()
    }
    fn pl_constant(&self) -> Option<f64> {
        (**self).pl_constant()
    }
}

impl<T: Objective + ?Sized> Objective for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &Point) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &Point) -> Option<Point> {
        (**self).gradient(x)
    }
    fn lipschitz_grad(&self) -> Option<f64> {
        (**self).lipschitz_grad()
    }
    fn pl_constant(&self) -> Option<f64> {
        (**self).pl_constant()
    }
}

type ValueFn = Box<dyn Fn(&Point) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&Point) -> Point + Send + Sync>;

/// Objective built from closures.
pub struct FnObjective {
    dim: usize,
    value: ValueFn,
    grad: Option<GradFn>,
    lipschitz: Option<f64>,
    pl: Option<f64>,
}

impl FnObjective {
    pub fn new(dim: usize, value: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            dim,
            value: Box::new(value),
            grad: None,
            lipschitz: None,
            pl: None,
        }
    }

    pub fn with_gradient(mut self, grad: impl Fn(&Point) -> Point + Send + Sync + 'static) -> Self {
        self.grad = Some(Box::new(grad));
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_pl(mut self, mu: f64) -> Self {
        self.pl = Some(mu);
        self
    }
}

impl Objective for FnObjective {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Point) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &Point) -> Option<Point> {
        self.grad.as_ref().map(|g| g(x))
    }
    fn lipschitz_grad(&self) -> Option<f64> {
        self.lipschitz
    }
    fn pl_constant(&self) -> Option<f64> {
        self.pl
    }
}

/// Central-difference gradient `(f(x + h eᵢ) − f(x − h eᵢ)) / 2h`.
pub fn finite_difference_gradient<O: Objective + ?Sized>(objective: &O, x: &Point, h: f64) -> Result<Point> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("difference step h = {h}")));
    }
    let mut g = Vec::with_capacity(x.dim());
    let mut probe = x.to_vec();
    for i in 0..x.dim() {
        let xi = probe[i];
        probe[i] = xi + h;
        let up = objective.value(&Point::from_vec_unchecked(probe.clone()));
        probe[i] = xi - h;
        let down = objective.value(&Point::from_vec_unchecked(probe.clone()));
        probe[i] = xi;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Evaluation(format!(
                "non-finite value while differencing coordinate {i}"
            )));
        }
        g.push((up - down) / (2.0 * h));
    }
    Ok(Point::from_vec_unchecked(g))
}
