//! Ground spaces: a metric, a p-descent operator and a local-barycenter test.
//!
//! A p-descent operator `LB(S, x)` either strictly lowers the p-Fréchet value
//! `sum_s d(s, x)^p` or returns `x` unchanged, in which case `x` must already
//! be a local p-barycenter of `S`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::barycenter::{self, BarycenterParams};
use crate::error::{Error, Result};
use crate::symprod::{self, Configuration, UniformAtomicMeasure};

/// Contract every ground space `X` provides to the symmetric-product machinery.
pub trait GroundSpace: Sync {
    type Point: Clone + fmt::Debug + PartialEq + Send + Sync;

    /// Reject points that are not valid members of this space.
    fn validate(&self, x: &Self::Point) -> Result<()>;

    fn distance(&self, a: &Self::Point, b: &Self::Point) -> f64;

    /// One application of the p-descent operator `LB(set, x)`.
    fn descent(&self, set: &[Self::Point], x: &Self::Point, p: f64) -> Result<Self::Point>;

    fn is_local_barycenter(&self, set: &[Self::Point], x: &Self::Point, p: f64, tol: f64) -> bool;

    /// Point at fraction `t` along a minimal geodesic from `a` to `b`.
    fn geodesic(&self, _a: &Self::Point, _b: &Self::Point, _t: f64) -> Result<Self::Point> {
        Err(Error::Unsupported("geodesic interpolation on this ground space"))
    }
}

/// `sum_{s in set} d(s, x)^p`.
pub fn frechet_ground<G: GroundSpace>(space: &G, set: &[G::Point], x: &G::Point, p: f64) -> f64 {
    set.iter().map(|s| powp(space.distance(s, x), p)).sum()
}

#[inline]
pub(crate) fn powp(d: f64, p: f64) -> f64 {
    if p == 2.0 {
        d * d
    } else if p == 1.0 {
        d
    } else {
        d.powf(p)
    }
}

// ---------------------------------------------------------------------------
// Euclidean space

/// `R^n` with the Euclidean norm. `dim = None` accepts any common dimension.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Euclidean {
    pub dim: Option<usize>,
}

impl Euclidean {
    pub fn new(dim: usize) -> Self {
        Self { dim: Some(dim) }
    }

    pub fn any_dim() -> Self {
        Self { dim: None }
    }
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(raw_euclidean(a, b))
}

#[inline]
fn raw_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Coordinatewise mean; summation runs in slice order.
pub fn euclidean_mean(set: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = set.first().ok_or(Error::Empty("descent needs a nonempty set"))?;
    let dim = first.len();
    let mut acc = vec![0.0; dim];
    for s in set {
        if s.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: s.len() });
        }
        for (a, v) in acc.iter_mut().zip(s) {
            *a += v;
        }
    }
    let n = set.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// The 2-descent operator on `R^n`: the mean of `set`, independent of `x`.
pub fn euclidean_descent(set: &[Vec<f64>], _x: &[f64]) -> Result<Vec<f64>> {
    euclidean_mean(set)
}

fn scale_of(set: &[Vec<f64>]) -> f64 {
    set.iter().flat_map(|s| s.iter()).fold(0.0f64, |m, v| m.max(v.abs()))
}

/// One Vardi–Zhang modified Weiszfeld step towards the geometric median.
fn weiszfeld_step(set: &[Vec<f64>], x: &[f64], coincide_tol: f64) -> Vec<f64> {
    let dim = x.len();
    let mut num = vec![0.0; dim];
    let mut wsum = 0.0;
    let mut pull = vec![0.0; dim];
    let mut coincident = 0usize;
    for s in set {
        let d = raw_euclidean(s, x);
        if d <= coincide_tol {
            coincident += 1;
            continue;
        }
        let w = 1.0 / d;
        wsum += w;
        for i in 0..dim {
            num[i] += w * s[i];
            pull[i] += w * (s[i] - x[i]);
        }
    }
    if wsum == 0.0 {
        return x.to_vec();
    }
    let r = pull.iter().map(|v| v * v).sum::<f64>().sqrt();
    let eta = coincident as f64;
    let (a, b) = if r == 0.0 { (1.0, 0.0) } else { ((1.0 - eta / r).max(0.0), (eta / r).min(1.0)) };
    (0..dim).map(|i| a * num[i] / wsum + b * x[i]).collect()
}

fn is_geometric_median(set: &[Vec<f64>], x: &[f64], tol: f64) -> bool {
    let scale = 1.0 + scale_of(set);
    let dim = x.len();
    let mut pull = vec![0.0; dim];
    let mut coincident = 0usize;
    for s in set {
        let d = raw_euclidean(s, x);
        if d <= tol * scale {
            coincident += 1;
            continue;
        }
        for i in 0..dim {
            pull[i] += (s[i] - x[i]) / d;
        }
    }
    let r = pull.iter().map(|v| v * v).sum::<f64>().sqrt();
    r <= coincident as f64 + tol * set.len() as f64
}

impl GroundSpace for Euclidean {
    type Point = Vec<f64>;

    fn validate(&self, x: &Vec<f64>) -> Result<()> {
        if let Some(d) = self.dim {
            if x.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: x.len() });
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPoint(format!("non-finite coordinate in {x:?}")));
        }
        Ok(())
    }

    fn distance(&self, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        raw_euclidean(a, b)
    }

    fn descent(&self, set: &[Vec<f64>], x: &Vec<f64>, p: f64) -> Result<Vec<f64>> {
        if set.is_empty() {
            return Err(Error::Empty("descent needs a nonempty set"));
        }
        if p == 2.0 {
            euclidean_descent(set, x)
        } else if p == 1.0 {
            let scale = 1.0 + scale_of(set);
            if is_geometric_median(set, x, 1e-9) {
                return Ok(x.clone());
            }
            let start = frechet_ground(self, set, x, 1.0);
            let mut cur = x.clone();
            for _ in 0..1000 {
                let next = weiszfeld_step(set, &cur, 1e-12 * scale);
                let moved = raw_euclidean(&next, &cur);
                cur = next;
                if moved <= 1e-13 * scale {
                    break;
                }
            }
            if frechet_ground(self, set, &cur, 1.0) < start {
                Ok(cur)
            } else {
                Ok(x.clone())
            }
        } else {
            Err(Error::UnsupportedExponent(p))
        }
    }

    fn is_local_barycenter(&self, set: &[Vec<f64>], x: &Vec<f64>, p: f64, tol: f64) -> bool {
        if set.is_empty() {
            return false;
        }
        if p == 1.0 {
            return is_geometric_median(set, x, tol);
        }
        match euclidean_mean(set) {
            Ok(mean) => raw_euclidean(&mean, x) <= tol * (1.0 + scale_of(set)),
            Err(_) => false,
        }
    }

    fn geodesic(&self, a: &Vec<f64>, b: &Vec<f64>, t: f64) -> Result<Vec<f64>> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
        }
        Ok(a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect())
    }
}

// ---------------------------------------------------------------------------
// Circle

/// A point of `S^1`, stored as an angle in `[-pi, pi)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    pub fn new(theta: f64) -> Self {
        Angle(normalize_angle(theta))
    }

    #[inline]
    pub fn radians(self) -> f64 {
        self.0
    }
}

/// Wrap into `[-pi, pi)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut t = (theta + PI).rem_euclid(two_pi) - PI;
    if t >= PI {
        t -= two_pi;
    }
    if t < -PI {
        t = -PI;
    }
    t
}

/// Angular tolerance for deciding that two points are antipodal.
pub const ANTIPODE_TOL: f64 = 1e-9;

/// `S^1` with its geodesic (arc-length) metric.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circle;

/// Signed angle from `x` to `y` in `[-pi, pi)`.
#[inline]
pub fn signed_angle(x: Angle, y: Angle) -> f64 {
    normalize_angle(y.0 - x.0)
}

pub fn circle_distance(a: Angle, b: Angle) -> f64 {
    signed_angle(a, b).abs()
}

#[inline]
fn is_antipode(x: Angle, y: Angle, tol: f64) -> bool {
    signed_angle(x, y).abs() >= PI - tol
}

/// Signed angles from `x` to each point of `set`, with all antipodes of `x`
/// placed at whichever of `{-pi, +pi}` gives the smaller spread
/// `D' = sum (a - mean)^2`; ties go to `+pi`. Returns the angles and their mean.
fn resolved_angles(set: &[Angle], x: Angle) -> (Vec<f64>, f64) {
    let raw: Vec<(f64, bool)> = set
        .iter()
        .map(|&s| (signed_angle(x, s), is_antipode(x, s, ANTIPODE_TOL)))
        .collect();
    let with = |anti: f64| -> (Vec<f64>, f64, f64) {
        let a: Vec<f64> = raw.iter().map(|&(v, is_a)| if is_a { anti } else { v }).collect();
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        let spread = a.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        (a, mean, spread)
    };
    if !raw.iter().any(|&(_, a)| a) {
        let (a, mean, _) = with(PI);
        return (a, mean);
    }
    let (ap, mp, dp) = with(PI);
    let (am, mm, dm) = with(-PI);
    if dm < dp && (dp - dm) > 1e-12 * (1.0 + dp) {
        (am, mm)
    } else {
        (ap, mp)
    }
}

/// The circle 2-descent operator: rotate `x` by the mean signed angle to `set`.
pub fn circle_descent(set: &[Angle], x: Angle) -> Result<Angle> {
    if set.is_empty() {
        return Err(Error::Empty("descent needs a nonempty set"));
    }
    let (_, mean) = resolved_angles(set, x);
    if mean == 0.0 {
        return Ok(x);
    }
    Ok(Angle::new(x.0 + mean))
}

/// `x` is a local 2-barycenter of `set` iff no point of `set` is antipodal to
/// `x` and the mean signed angle from `x` vanishes.
pub fn circle_is_local_barycenter(set: &[Angle], x: Angle, tol: f64) -> bool {
    if set.is_empty() {
        return false;
    }
    if set.iter().any(|&s| is_antipode(x, s, tol.max(ANTIPODE_TOL))) {
        return false;
    }
    let mean = set.iter().map(|&s| signed_angle(x, s)).sum::<f64>() / set.len() as f64;
    mean.abs() <= tol
}

impl GroundSpace for Circle {
    type Point = Angle;

    fn validate(&self, x: &Angle) -> Result<()> {
        if !x.0.is_finite() || x.0 < -PI || x.0 >= PI {
            return Err(Error::InvalidPoint(format!("angle {} outside [-pi, pi)", x.0)));
        }
        Ok(())
    }

    fn distance(&self, a: &Angle, b: &Angle) -> f64 {
        circle_distance(*a, *b)
    }

    fn descent(&self, set: &[Angle], x: &Angle, p: f64) -> Result<Angle> {
        if p != 2.0 {
            return Err(Error::UnsupportedExponent(p));
        }
        circle_descent(set, *x)
    }

    fn is_local_barycenter(&self, set: &[Angle], x: &Angle, p: f64, tol: f64) -> bool {
        p == 2.0 && circle_is_local_barycenter(set, *x, tol)
    }

    fn geodesic(&self, a: &Angle, b: &Angle, t: f64) -> Result<Angle> {
        let mut delta = signed_angle(*a, *b);
        if is_antipode(*a, *b, ANTIPODE_TOL) {
            delta = PI;
        }
        Ok(Angle::new(a.0 + t * delta))
    }
}

// ---------------------------------------------------------------------------
// Nested symmetric product SP^M X

/// `SP^M X` used as a ground space. Its descent operator runs the local
/// barycenter iteration on the inner space from the supplied seed.
#[derive(Debug, Clone)]
pub struct NestedSpace<G> {
    pub inner: G,
    /// Number of points per inner configuration.
    pub m: usize,
    pub params: BarycenterParams,
}

impl<G: GroundSpace> NestedSpace<G> {
    pub fn new(inner: G, m: usize, params: BarycenterParams) -> Self {
        Self { inner, m, params }
    }
}

impl<G: GroundSpace> GroundSpace for NestedSpace<G> {
    type Point = Configuration<G::Point>;

    fn validate(&self, x: &Self::Point) -> Result<()> {
        if x.k() != self.m {
            return Err(Error::SizeMismatch { expected: self.m, found: x.k() });
        }
        x.points().iter().try_for_each(|pt| self.inner.validate(pt))
    }

    fn distance(&self, a: &Self::Point, b: &Self::Point) -> f64 {
        symprod::wp_distance_unchecked(&self.inner, a, b, self.params.p).0
    }

    fn descent(&self, set: &[Self::Point], x: &Self::Point, p: f64) -> Result<Self::Point> {
        barycenter::nested_descent(&self.inner, set, x, p, &self.params)
    }

    fn is_local_barycenter(&self, set: &[Self::Point], x: &Self::Point, p: f64, tol: f64) -> bool {
        let params = BarycenterParams { p, ..self.params.clone() };
        barycenter::is_stationary_lenient(&self.inner, set, x, &params, tol)
    }

    fn geodesic(&self, a: &Self::Point, b: &Self::Point, t: f64) -> Result<Self::Point> {
        symprod::matched_geodesic(&self.inner, a, b, t, self.params.p)
    }
}

// ---------------------------------------------------------------------------
// Uniform atomic measures with a fixed number of atoms

/// Uniform atomic measures on `R^n` under `W_p`; the descent operator is the
/// free-support update restricted to measures with `atoms` atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureSpace {
    pub atoms: usize,
}

impl GroundSpace for MeasureSpace {
    type Point = UniformAtomicMeasure<Vec<f64>>;

    fn validate(&self, x: &Self::Point) -> Result<()> {
        if x.is_empty() {
            return Err(Error::Empty("measure with no atoms"));
        }
        x.atoms().iter().try_for_each(|a| Euclidean::any_dim().validate(a))
    }

    fn distance(&self, a: &Self::Point, b: &Self::Point) -> f64 {
        symprod::uniform_discrete_ot(&Euclidean::any_dim(), a, b, 2.0)
            .map(|r| r.distance)
            .unwrap_or(f64::INFINITY)
    }

    fn descent(&self, set: &[Self::Point], x: &Self::Point, p: f64) -> Result<Self::Point> {
        if p != 2.0 {
            return Err(Error::UnsupportedExponent(p));
        }
        if x.len() != self.atoms {
            return Err(Error::SizeMismatch { expected: self.atoms, found: x.len() });
        }
        barycenter::fixed_size_barycenter_descent(set, x)
    }

    fn is_local_barycenter(&self, set: &[Self::Point], x: &Self::Point, p: f64, tol: f64) -> bool {
        if p != 2.0 || set.is_empty() {
            return false;
        }
        match barycenter::fixed_size_barycenter_descent(set, x) {
            Ok(next) => {
                let scale = 1.0
                    + set
                        .iter()
                        .flat_map(|m| m.atoms().iter().flatten())
                        .fold(0.0f64, |acc, v| acc.max(v.abs()));
                next.atoms().iter().zip(x.atoms()).all(|(a, b)| raw_euclidean(a, b) <= tol * scale)
            }
            Err(_) => false,
        }
    }
}
