//! Positive spanning sets and their cosine measure.
//!
//! The cosine measure of a set `D` of unit directions is
//! `cm(D) = min_{u ≠ 0} max_{d ∈ D} uᵀd / ‖u‖`. Computing it exactly is hard
//! in general, so each set carries a certified lower bound `kappa_lower`:
//! closed forms for the two canonical families (`1/√n` for `[I, −I]` and
//! `1/n` for the regular-simplex basis), inherited unchanged by rotations.
//! [`cosine_measure_mc`] gives a Monte-Carlo estimate that approaches `cm(D)`
//! from above.

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::rng::RngStream;

const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanningKind {
    OrthonormalPm,
    MinimalUniform,
    Rotated,
    ProbabilisticPair,
}

impl SpanningKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpanningKind::OrthonormalPm => "orthonormal_pm",
            SpanningKind::MinimalUniform => "minimal_uniform",
            SpanningKind::Rotated => "rotated",
            SpanningKind::ProbabilisticPair => "probabilistic_pair",
        }
    }
}

impl fmt::Display for SpanningKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SpanningKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthonormal_pm" => Ok(SpanningKind::OrthonormalPm),
            "minimal_uniform" => Ok(SpanningKind::MinimalUniform),
            "rotated" => Ok(SpanningKind::Rotated),
            "probabilistic_pair" => Ok(SpanningKind::ProbabilisticPair),
            other => Err(Error::InvalidSet(format!("unknown spanning kind `{other}`"))),
        }
    }
}

/// An ordered list of unit directions with a certified cosine-measure bound.
///
/// For [`SpanningKind::ProbabilisticPair`] the set is `{d, −d}` and does not
/// positively span ℝⁿ for `n > 1`; its `kappa_lower` is the median of the
/// per-draw alignment `|uᵀd|` (the value exceeded with probability 1/2), not a
/// deterministic certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanningSet {
    directions: Vec<Point>,
    kappa_lower: f64,
    kind: SpanningKind,
}

impl SpanningSet {
    pub fn new(directions: Vec<Point>, kappa_lower: f64, kind: SpanningKind) -> Result<Self> {
        let Some(first) = directions.first() else {
            return Err(Error::InvalidSet("empty direction list".into()));
        };
        let dim = first.dim();
        if dim == 0 {
            return Err(Error::InvalidDimension("directions of dimension 0".into()));
        }
        for (i, d) in directions.iter().enumerate() {
            if d.dim() != dim {
                return Err(Error::InvalidSet(format!(
                    "direction {i} has dimension {} (expected {dim})",
                    d.dim()
                )));
            }
            if (d.norm() - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidSet(format!(
                    "direction {i} has norm {} (expected 1)",
                    d.norm()
                )));
            }
        }
        if kind != SpanningKind::ProbabilisticPair && directions.len() < dim + 1 {
            return Err(Error::InvalidSet(format!(
                "{} directions cannot positively span R^{dim}",
                directions.len()
            )));
        }
        if !(kappa_lower > 0.0 && kappa_lower <= 1.0) {
            return Err(Error::InvalidSet(format!("kappa_lower = {kappa_lower} outside (0, 1]")));
        }
        Ok(Self {
            directions,
            kappa_lower,
            kind,
        })
    }

    pub fn directions(&self) -> &[Point] {
        &self.directions
    }

    pub fn kappa_lower(&self) -> f64 {
        self.kappa_lower
    }

    pub fn kind(&self) -> SpanningKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.directions[0].dim()
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// `max_d uᵀd` for a unit vector `u`.
    pub fn best_alignment(&self, u: &Point) -> f64 {
        self.directions
            .iter()
            .map(|d| d.dot(u))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Writes one direction per line, coordinates separated by single spaces.
    pub fn write_matrix<W: Write>(&self, mut out: W) -> Result<()> {
        for d in &self.directions {
            let row: Vec<String> = d.iter().map(|c| format!("{c}")).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn to_matrix_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_matrix(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("utf-8")
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::InvalidDimension("dimension must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// `[e₁, …, eₙ, −e₁, …, −eₙ]` with `kappa_lower = 1/√n`.
pub fn make_orthonormal_pm(dim: usize) -> Result<SpanningSet> {
    check_dim(dim)?;
    let mut dirs: Vec<Point> = (0..dim).map(|i| Point::basis(dim, i)).collect();
    dirs.extend((0..dim).map(|i| {
        let mut v = vec![0.0; dim];
        v[i] = -1.0;
        Point::from_vec_unchecked(v)
    }));
    SpanningSet::new(dirs, 1.0 / (dim as f64).sqrt(), SpanningKind::OrthonormalPm)
}

/// The `n + 1` normalized vertices of a regular simplex centred at the origin.
///
/// Pairwise inner products are all `−1/n` and the cosine measure is `1/n`.
/// Built from `e₁, …, eₙ` and `t·𝟙` with `t = (1 − √(n+1))/n`, which are
/// mutually equidistant, then centred and normalized.
pub fn make_minimal_uniform(dim: usize) -> Result<SpanningSet> {
    check_dim(dim)?;
    let n = dim as f64;
    let t = (1.0 - (n + 1.0).sqrt()) / n;
    let mut verts: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            let mut v = vec![0.0; dim];
            v[i] = 1.0;
            v
        })
        .collect();
    verts.push(vec![t; dim]);
    let mut centroid = vec![0.0; dim];
    for v in &verts {
        for (c, x) in centroid.iter_mut().zip(v) {
            *c += x / (n + 1.0);
        }
    }
    let dirs = verts
        .into_iter()
        .map(|v| {
            let centred: Vec<f64> = v.iter().zip(&centroid).map(|(x, c)| x - c).collect();
            Point::from_vec_unchecked(centred)
                .normalized()
                .expect("simplex vertex differs from centroid")
        })
        .collect();
    SpanningSet::new(dirs, 1.0 / n, SpanningKind::MinimalUniform)
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of `diag(R)` folded into `Q`.
pub fn random_orthogonal(dim: usize, rng: RngStream) -> DMatrix<f64> {
    let mut r = rng.rng();
    let g = DMatrix::from_fn(dim, dim, |_, _| r.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let rm = qr.r();
    for j in 0..dim {
        if rm[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Applies the orthogonal matrix `q` to every direction. The cosine measure is
/// rotation invariant, so `kappa_lower` carries over.
pub fn rotate_with(base: &SpanningSet, q: &DMatrix<f64>) -> Result<SpanningSet> {
    let n = base.dim();
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::InvalidDimension(format!(
            "rotation is {}x{} but set lives in R^{n}",
            q.nrows(),
            q.ncols()
        )));
    }
    let dirs = base
        .directions
        .iter()
        .map(|d| {
            let v = q * nalgebra::DVector::from_column_slice(d.as_slice());
            // Renormalize to absorb rounding in the product.
            Point::from_vec_unchecked(v.iter().copied().collect())
                .normalized()
                .expect("rotation of a unit vector is nonzero")
        })
        .collect();
    let kind = if base.kind == SpanningKind::ProbabilisticPair {
        SpanningKind::ProbabilisticPair
    } else {
        SpanningKind::Rotated
    };
    SpanningSet::new(dirs, base.kappa_lower, kind)
}

/// Rotates `base` by a uniformly random orthogonal matrix.
pub fn make_rotated(base: &SpanningSet, rng: RngStream) -> Result<SpanningSet> {
    let q = random_orthogonal(base.dim(), rng);
    rotate_with(base, &q)
}

/// Uniform sample from the unit sphere in ℝⁿ.
pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Point {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = Point::from_vec_unchecked(v).normalized() {
            return u;
        }
    }
}

/// `{d, −d}` for `d` uniform on the unit sphere.
pub fn make_probabilistic_pair(dim: usize, rng: RngStream) -> Result<SpanningSet> {
    check_dim(dim)?;
    let d = random_unit_vector(dim, &mut rng.rng());
    let minus = d.scaled(-1.0);
    SpanningSet::new(
        vec![d, minus],
        probabilistic_pair_kappa(dim),
        SpanningKind::ProbabilisticPair,
    )
}

/// Fraction of the unit sphere in ℝⁿ with `uᵀd ≥ t` for a fixed unit `u`.
///
/// Uses `P = ∫₀^θ sinⁿ⁻²φ dφ / ∫₀^π sinⁿ⁻²φ dφ` with `θ = arccos t`, integrated
/// by composite Simpson.
pub fn sphere_cap_fraction(dim: usize, t: f64) -> f64 {
    if t <= -1.0 {
        return 1.0;
    }
    if t > 1.0 {
        return 0.0;
    }
    if dim == 1 {
        return 0.5;
    }
    let theta = t.clamp(-1.0, 1.0).acos();
    let k = (dim - 2) as i32;
    let simpson = |b: f64| {
        let m = 4000;
        let h = b / m as f64;
        let f = |x: f64| x.sin().powi(k);
        let mut s = f(0.0) + f(b);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0
    };
    simpson(theta) / simpson(std::f64::consts::PI)
}

/// Median of `|uᵀd|` for `d` uniform on the sphere: solves `2·cap(t) = 1/2`.
fn probabilistic_pair_kappa(dim: usize) -> f64 {
    if dim == 1 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if 2.0 * sphere_cap_fraction(dim, mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Monte-Carlo estimate of `cm(D)`: minimum over `samples` random unit `u` of
/// `max_d uᵀd`. Always an upper bound on the true cosine measure.
pub fn cosine_measure_mc(set: &SpanningSet, samples: usize, rng: RngStream) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidSet("empty direction list".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    let mut r = rng.rng();
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let u = random_unit_vector(set.dim(), &mut r);
        worst = worst.min(set.best_alignment(&u));
    }
    Ok(worst)
}

/// Monte-Carlo positive-spanning check: every sampled unit `u` has some
/// direction with `uᵀd > 0`.
pub fn positively_spans_mc(set: &SpanningSet, samples: usize, rng: RngStream) -> bool {
    let mut r = rng.rng();
    (0..samples).all(|_| {
        let u = random_unit_vector(set.dim(), &mut r);
        set.best_alignment(&u) > 0.0
    })
}

/// Builds a set of the given kind; `rng` is used by the random kinds.
pub fn make(kind: SpanningKind, dim: usize, rng: RngStream) -> Result<SpanningSet> {
    match kind {
        SpanningKind::OrthonormalPm => make_orthonormal_pm(dim),
        SpanningKind::MinimalUniform => make_minimal_uniform(dim),
        SpanningKind::Rotated => make_rotated(&make_orthonormal_pm(dim)?, rng),
        SpanningKind::ProbabilisticPair => make_probabilistic_pair(dim, rng),
    }
}
