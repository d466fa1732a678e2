//! Test problems with known structure.
//!
//! Minimization problems carry their optimal value, minimizer and smoothness
//! constants. Games implement [`Game`] and expose analytic block gradients,
//! and where available a closed-form inner maximizer `y*(x)`.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::objective::{FnObjective, Objective};
use crate::point::Point;
use crate::rng::RngStream;

/// Certified PL constant of `x² + 3 sin²x`: the minimum of `½f′²/f` over a
/// 1e-4 grid on [−10, 10] is 0.17553, rounded down here.
pub const PL_NONCONVEX_MU: f64 = 0.1755;

/// Spectral-norm bound of the Rosenbrock Hessian on [−2,2]×[−1,3].
pub const ROSENBROCK_LIPSCHITZ: f64 = 5327.0;

/// Minimization problem with known optimum.
pub struct MinProblem {
    pub name: &'static str,
    objective: FnObjective,
    pub f_star: f64,
    pub minimizer: Point,
    pub lipschitz: f64,
    pub pl: Option<f64>,
    /// Box `[lo, hi]` on which `lipschitz` holds; `None` means everywhere.
    pub lipschitz_region: Option<(Point, Point)>,
}

impl MinProblem {
    /// Whether `x` lies where the declared smoothness constant is valid.
    pub fn in_lipschitz_region(&self, x: &Point) -> bool {
        match &self.lipschitz_region {
            None => true,
            Some((lo, hi)) => x
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .all(|(v, (a, b))| a <= v && v <= b),
        }
    }
}

impl Objective for MinProblem {
    fn dim(&self) -> usize {
        self.objective.dim()
    }
    fn value(&self, x: &Point) -> f64 {
        self.objective.value(x)
    }
    fn gradient(&self, x: &Point) -> Option<Point> {
        self.objective.gradient(x)
    }
    fn lipschitz_grad(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
    fn pl_constant(&self) -> Option<f64> {
        self.pl
    }
}

/// `f(x) = ‖x‖²`: `f* = 0`, `L = 2`, `μ = 2`.
pub fn quadratic_min(dim: usize) -> Result<MinProblem> {
    if dim == 0 {
        return Err(Error::InvalidDimension("quadratic_min needs dim >= 1".into()));
    }
    Ok(MinProblem {
        name: "quadratic_min",
        objective: FnObjective::new(dim, |x: &Point| x.norm_sq()).with_gradient(|x: &Point| x.scaled(2.0)),
        f_star: 0.0,
        minimizer: Point::zeros(dim),
        lipschitz: 2.0,
        pl: Some(2.0),
        lipschitz_region: None,
    })
}

/// `f(x, y) = (1 − x)² + 100 (y − x²)²`, minimized at (1, 1).
pub fn rosenbrock() -> MinProblem {
    let value = |p: &Point| {
        let (x, y) = (p[0], p[1]);
        (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
    };
    let grad = |p: &Point| {
        let (x, y) = (p[0], p[1]);
        Point::from([-2.0 * (1.0 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x)])
    };
    MinProblem {
        name: "rosenbrock",
        objective: FnObjective::new(2, value).with_gradient(grad),
        f_star: 0.0,
        minimizer: Point::from([1.0, 1.0]),
        lipschitz: ROSENBROCK_LIPSCHITZ,
        pl: None,
        lipschitz_region: Some((Point::from([-2.0, -1.0]), Point::from([2.0, 3.0]))),
    }
}

/// `f(x) = x² + 3 sin²x`: nonconvex, PL with [`PL_NONCONVEX_MU`], `L = 8`.
pub fn pl_nonconvex_min() -> MinProblem {
    MinProblem {
        name: "pl_nonconvex_min",
        objective: FnObjective::new(1, |x: &Point| x[0] * x[0] + 3.0 * x[0].sin().powi(2))
            .with_gradient(|x: &Point| Point::from([2.0 * x[0] + 3.0 * (2.0 * x[0]).sin()])),
        f_star: 0.0,
        minimizer: Point::from([0.0]),
        lipschitz: 8.0,
        pl: Some(PL_NONCONVEX_MU),
        lipschitz_region: None,
    }
}

/// Looks up a minimization problem by name (`dim` applies to `quadratic_min`).
pub fn min_problem(name: &str, dim: usize) -> Result<MinProblem> {
    match name {
        "quadratic_min" => quadratic_min(dim),
        "rosenbrock" => Ok(rosenbrock()),
        "pl_nonconvex_min" => Ok(pl_nonconvex_min()),
        other => Err(Error::Config(format!("unknown minimization problem `{other}`"))),
    }
}

/// Block smoothness constants of a game and the PL constant of `−f(x, ·)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BlockConstants {
    pub l11: f64,
    pub l12: f64,
    pub l21: f64,
    pub l22: f64,
    pub mu: f64,
}

/// A smooth two-player game `min_x max_y f(x, y)`.
pub trait Game: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn value(&self, x: &Point, y: &Point) -> f64;
    fn grad_x(&self, x: &Point, y: &Point) -> Point;
    fn grad_y(&self, x: &Point, y: &Point) -> Point;

    /// Closed-form `argmax_y f(x, y)`, when known.
    fn inner_argmax(&self, _x: &Point) -> Option<Point> {
        None
    }

    fn constants(&self) -> Option<BlockConstants> {
        None
    }

    /// A known first-order Nash equilibrium.
    fn equilibrium(&self) -> Option<(Point, Point)> {
        None
    }

    /// `−f(x, ·)` as an objective for the max player.
    fn max_slice(&self, x: &Point) -> Box<dyn Objective + '_> {
        Box::new(MaxSlice {
            game: self,
            x: x.clone(),
        })
    }

    /// `f(·, y)` as an objective for the min player.
    fn min_slice(&self, y: &Point) -> Box<dyn Objective + '_> {
        Box::new(MinSlice {
            game: self,
            y: y.clone(),
        })
    }
}

/// `y ↦ −f(x, y)` for fixed `x`.
pub struct MaxSlice<'a, G: ?Sized> {
    pub game: &'a G,
    pub x: Point,
}

impl<G: Game + ?Sized> Objective for MaxSlice<'_, G> {
    fn dim(&self) -> usize {
        self.game.dim_y()
    }
    fn value(&self, y: &Point) -> f64 {
        -self.game.value(&self.x, y)
    }
    fn gradient(&self, y: &Point) -> Option<Point> {
        Some(self.game.grad_y(&self.x, y).scaled(-1.0))
    }
    fn lipschitz_grad(&self) -> Option<f64> {
        self.game.constants().map(|c| c.l22)
    }
    fn pl_constant(&self) -> Option<f64> {
        self.game.constants().map(|c| c.mu)
    }
}

/// `x ↦ f(x, y)` for fixed `y`.
pub struct MinSlice<'a, G: ?Sized> {
    pub game: &'a G,
    pub y: Point,
}

impl<G: Game + ?Sized> Objective for MinSlice<'_, G> {
    fn dim(&self) -> usize {
        self.game.dim_x()
    }
    fn value(&self, x: &Point) -> f64 {
        self.game.value(x, &self.y)
    }
    fn gradient(&self, x: &Point) -> Option<Point> {
        Some(self.game.grad_x(x, &self.y))
    }
    fn lipschitz_grad(&self) -> Option<f64> {
        self.game.constants().map(|c| c.l11)
    }
}

/// `g(x) = max_y f(x, y)` through the closed-form inner maximizer.
pub fn envelope<G: Game + ?Sized>(game: &G, x: &Point) -> Option<f64> {
    game.inner_argmax(x).map(|y| game.value(x, &y))
}

/// Scalar quadratic game `f(x, y) = a x²/2 + b x y − c y²/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticGame {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Game for QuadraticGame {
    fn dim_x(&self) -> usize {
        1
    }
    fn dim_y(&self) -> usize {
        1
    }
    fn value(&self, x: &Point, y: &Point) -> f64 {
        let (x, y) = (x[0], y[0]);
        0.5 * self.a * x * x + self.b * x * y - 0.5 * self.c * y * y
    }
    fn grad_x(&self, x: &Point, y: &Point) -> Point {
        Point::from([self.a * x[0] + self.b * y[0]])
    }
    fn grad_y(&self, x: &Point, y: &Point) -> Point {
        Point::from([self.b * x[0] - self.c * y[0]])
    }
    fn inner_argmax(&self, x: &Point) -> Option<Point> {
        (self.c > 0.0).then(|| Point::from([self.b * x[0] / self.c]))
    }
    fn constants(&self) -> Option<BlockConstants> {
        (self.c > 0.0).then_some(BlockConstants {
            l11: self.a.abs(),
            l12: self.b.abs(),
            l21: self.b.abs(),
            l22: self.c,
            mu: self.c,
        })
    }
    fn equilibrium(&self) -> Option<(Point, Point)> {
        Some((Point::from([0.0]), Point::from([0.0])))
    }
}

/// `f(x, y) = x²/2 + x y − y²/2`, equilibrium at the origin, `y*(x) = x`.
pub fn quadratic_saddle() -> QuadraticGame {
    QuadraticGame { a: 1.0, b: 1.0, c: 1.0 }
}

/// `f(x, y) = x y`, the classic game on which simultaneous GDA cycles outward.
pub fn bilinear() -> QuadraticGame {
    QuadraticGame { a: 0.0, b: 1.0, c: 0.0 }
}

/// `f(x, y) = x² − y²`.
pub fn decoupled() -> QuadraticGame {
    QuadraticGame { a: 2.0, b: 0.0, c: 2.0 }
}

/// Binary classification data: one feature row per sample, labels in {0, 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Dataset(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if features.is_empty() {
            return Err(Error::Dataset("dataset is empty".into()));
        }
        let d = features[0].len();
        for (i, row) in features.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Dataset(format!(
                    "row {i} has {} features, expected {d}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!("row {i} has a non-finite feature")));
            }
        }
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::Dataset(format!("row {i}: label {} is not 0 or 1", labels[i])));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features[0].len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Parses `feature_1,…,feature_d,label` with a header row.
    pub fn from_csv_reader<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::Dataset(format!(
                    "row {i}: need at least one feature and a label"
                )));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Dataset(format!("row {i}: cannot parse `{s}`")))
            };
            let row = rec.iter().take(rec.len() - 1).map(parse).collect::<Result<Vec<_>>>()?;
            let label = parse(&rec[rec.len() - 1])?;
            if label != 0.0 && label != 1.0 {
                return Err(Error::Dataset(format!("row {i}: label {label} is not 0 or 1")));
            }
            features.push(row);
            labels.push(label as u8);
        }
        Self::new(features, labels)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.n_features()).map(|j| format!("feature_{j}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (row, label) in self.features.iter().zip(&self.labels) {
            let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            fields.push(label.to_string());
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Linearly separable data with 10% label flips: features and a hidden
    /// weight vector are standard normal, the label is `1[wᵀx > 0]`.
    pub fn synthetic(seed: u64, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Dataset(format!(
                "synthetic dataset needs n, d >= 1 (got n={n}, d={d})"
            )));
        }
        let mut rng = RngStream::new(seed, 0).rng();
        let w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let mut features = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let score: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
            let mut label = u8::from(score > 0.0);
            if rng.random::<f64>() < 0.1 {
                label = 1 - label;
            }
            features.push(x);
            labels.push(label);
        }
        Self::new(features, labels)
    }
}

const PROB_CLAMP: f64 = 1e-12;

/// Distributionally robust logistic regression
/// `f(θ, p) = Σ pᵢ ℓᵢ(θ) − λ Σ (pᵢ − 1/n)²`.
///
/// `θ` holds one weight per feature followed by a bias; `ℓᵢ` is the
/// cross-entropy of `sigmoid(θᵀx̃ᵢ)`, with the probability clamped to
/// `[1e-12, 1 − 1e-12]`. The weights `p` are unconstrained, so the inner
/// maximizer is `pᵢ = 1/n + ℓᵢ/(2λ)`.
#[derive(Debug, Clone)]
pub struct RobustRegression {
    /// Features with a trailing 1 for the bias.
    rows: Vec<Vec<f64>>,
    labels: Vec<f64>,
    lambda: f64,
    frobenius: f64,
}

impl RobustRegression {
    pub fn new(data: &LabeledDataset, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidRegularization(lambda));
        }
        let rows: Vec<Vec<f64>> = data
            .features()
            .iter()
            .map(|r| r.iter().copied().chain(std::iter::once(1.0)).collect())
            .collect();
        let frobenius = rows.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        Ok(Self {
            rows,
            labels: data.labels().iter().map(|&l| f64::from(l)).collect(),
            lambda,
            frobenius,
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn probability(&self, theta: &Point, i: usize) -> f64 {
        let z: f64 = self.rows[i].iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
        (1.0 / (1.0 + (-z).exp())).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
    }

    /// Per-sample cross-entropy losses `ℓᵢ(θ)`.
    pub fn losses(&self, theta: &Point) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                let s = self.probability(theta, i);
                let y = self.labels[i];
                -(y * s.ln() + (1.0 - y) * (1.0 - s).ln())
            })
            .collect()
    }

    fn value_from_losses(&self, losses: &[f64], p: &Point) -> f64 {
        let u = 1.0 / self.n() as f64;
        let fit: f64 = losses.iter().zip(p.iter()).map(|(l, w)| l * w).sum();
        let reg: f64 = p.iter().map(|w| (w - u) * (w - u)).sum();
        fit - self.lambda * reg
    }
}

impl Game for RobustRegression {
    fn dim_x(&self) -> usize {
        self.rows[0].len()
    }
    fn dim_y(&self) -> usize {
        self.n()
    }
    fn value(&self, x: &Point, y: &Point) -> f64 {
        self.value_from_losses(&self.losses(x), y)
    }
    fn grad_x(&self, x: &Point, y: &Point) -> Point {
        let mut g = vec![0.0; self.dim_x()];
        for i in 0..self.n() {
            let r = y[i] * (self.probability(x, i) - self.labels[i]);
            for (gj, xj) in g.iter_mut().zip(&self.rows[i]) {
                *gj += r * xj;
            }
        }
        Point::from(g)
    }
    fn grad_y(&self, x: &Point, y: &Point) -> Point {
        let u = 1.0 / self.n() as f64;
        let losses = self.losses(x);
        Point::from(
            losses
                .iter()
                .zip(y.iter())
                .map(|(l, w)| l - 2.0 * self.lambda * (w - u))
                .collect::<Vec<_>>(),
        )
    }
    fn inner_argmax(&self, x: &Point) -> Option<Point> {
        let u = 1.0 / self.n() as f64;
        Some(Point::from(
            self.losses(x)
                .iter()
                .map(|l| u + l / (2.0 * self.lambda))
                .collect::<Vec<_>>(),
        ))
    }
    /// `L₂₂ = μ = 2λ` exactly. `L₁₂ = L₂₁ = ‖X̃‖_F` since `|sᵢ − yᵢ| ≤ 1`.
    /// `L₁₁ = ‖X̃‖²_F / 4` is a local bound valid while every `|pᵢ| ≤ 1`.
    fn constants(&self) -> Option<BlockConstants> {
        Some(BlockConstants {
            l11: 0.25 * self.frobenius * self.frobenius,
            l12: self.frobenius,
            l21: self.frobenius,
            l22: 2.0 * self.lambda,
            mu: 2.0 * self.lambda,
        })
    }
    fn max_slice(&self, x: &Point) -> Box<dyn Objective + '_> {
        Box::new(RobustMaxSlice {
            game: self,
            losses: self.losses(x),
        })
    }
}

/// The max player's slice with the losses precomputed, `O(n)` per value.
struct RobustMaxSlice<'a> {
    game: &'a RobustRegression,
    losses: Vec<f64>,
}

impl Objective for RobustMaxSlice<'_> {
    fn dim(&self) -> usize {
        self.game.n()
    }
    fn value(&self, p: &Point) -> f64 {
        -self.game.value_from_losses(&self.losses, p)
    }
    fn gradient(&self, p: &Point) -> Option<Point> {
        let u = 1.0 / self.game.n() as f64;
        Some(Point::from(
            self.losses
                .iter()
                .zip(p.iter())
                .map(|(l, w)| 2.0 * self.game.lambda * (w - u) - l)
                .collect::<Vec<_>>(),
        ))
    }
    fn lipschitz_grad(&self) -> Option<f64> {
        Some(2.0 * self.game.lambda)
    }
    fn pl_constant(&self) -> Option<f64> {
        Some(2.0 * self.game.lambda)
    }
}

/// Convenience constructor mirroring the other problems.
pub fn robust_regression(data: &LabeledDataset, lambda: f64) -> Result<RobustRegression> {
    RobustRegression::new(data, lambda)
}
