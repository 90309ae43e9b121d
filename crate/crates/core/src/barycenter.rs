//! Local p-barycenters in `SP^k X`.
//!
//! Each while-iteration matches the current estimate `x` to every ensemble
//! element, then replaces each coordinate `x_i` by the ground descent operator
//! applied to the points matched to it. The functional
//! `D = sum_j sum_i d(x_i, t^j_i)^p` (raw assignment costs, no `1/k`) is
//! recorded per iteration and decreases strictly on every iteration but the
//! last.
//!
//! Two modes are available. `Single` uses one optimal matching per element
//! (lexicographic tie-break). `Exhaustive` enumerates every optimal matching
//! per element and loops over the product of those sets, so the returned
//! configuration is stationary for every choice of optimal matchings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{enumerate_optimal, solve_assignment, EnumerationLimits, Matching, MatchingSet};
use crate::error::{Error, Result};
use crate::metric::{Euclidean, GroundSpace};
use crate::symprod::{cost_matrix, uniform_discrete_ot, Configuration, UniformAtomicMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One optimal matching per element and iteration.
    #[default]
    Single,
    /// Loop over every combination of optimal matchings.
    Exhaustive,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" | "single-matching" => Ok(Mode::Single),
            "exhaustive" => Ok(Mode::Exhaustive),
            other => Err(Error::InvalidParameter(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarycenterParams {
    pub p: f64,
    pub mode: Mode,
    pub max_iters: usize,
    /// Largest coordinate move still treated as "no change". `None` picks
    /// `1e-9 * (1 + data scale)`.
    pub conv_tol: Option<f64>,
    /// Absolute tolerance for equally optimal matchings. `None` picks
    /// `1e-9 * (1 + optimum)` per assignment.
    pub cost_tol: Option<f64>,
    /// Relative decrease of `D` below which the run is declared stagnant.
    pub stagnation_rel: f64,
    pub limits: EnumerationLimits,
}

impl Default for BarycenterParams {
    fn default() -> Self {
        Self {
            p: 2.0,
            mode: Mode::Single,
            max_iters: 500,
            conv_tol: None,
            cost_tol: None,
            stagnation_rel: 1e-12,
            limits: EnumerationLimits::default(),
        }
    }
}

impl BarycenterParams {
    /// Defaults for the inner run of a nested descent operator.
    pub fn inner_default() -> Self {
        Self { max_iters: 200, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p = {} must be >= 1", self.p)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        for (name, tol) in [("conv_tol", self.conv_tol), ("cost_tol", self.cost_tol)] {
            if let Some(t) = tol {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(Error::InvalidParameter(format!("{name} = {t} must be positive")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    /// `D` at the start of every while-iteration.
    pub d_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// True when the run stopped because `D` no longer decreased.
    pub stagnated: bool,
    pub mode: Mode,
    pub conv_tol: f64,
}

impl IterationDiagnostics {
    /// Every entry but the last is strictly larger than its successor.
    pub fn strictly_decreasing_except_last(&self) -> bool {
        let t = &self.d_trace;
        if t.len() < 2 {
            return true;
        }
        t[..t.len() - 1].windows(2).all(|w| w[1] < w[0]) && t[t.len() - 1] <= t[t.len() - 2]
    }
}

/// An ensemble element reordered to match the barycenter coordinatewise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementLabeling<P> {
    /// `representative[i]` is matched to barycenter coordinate `i`.
    pub representative: Configuration<P>,
    /// `matching.permutation[i]` is the position, in the original element,
    /// of the point given label `i`.
    pub matching: Matching,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarycenterResult<P> {
    pub barycenter: Configuration<P>,
    pub labelings: Vec<ElementLabeling<P>>,
    pub diagnostics: IterationDiagnostics,
}

/// Check that the ensemble is nonempty, shares `k` with `x`, and contains
/// only valid points.
pub fn validate_ensemble<G: GroundSpace>(
    space: &G,
    ensemble: &[Configuration<G::Point>],
    x: &Configuration<G::Point>,
) -> Result<()> {
    if ensemble.is_empty() {
        return Err(Error::Empty("ensemble needs at least one element"));
    }
    for s in ensemble {
        if s.k() != x.k() {
            return Err(Error::SizeMismatch { expected: x.k(), found: s.k() });
        }
        s.iter().try_for_each(|pt| space.validate(pt))?;
    }
    x.iter().try_for_each(|pt| space.validate(pt))
}

/// The p-Fréchet functional `sum_s W_p(s, x)^p`.
pub fn frechet_value<G: GroundSpace>(
    space: &G,
    ensemble: &[Configuration<G::Point>],
    x: &Configuration<G::Point>,
    p: f64,
) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(Error::Empty("ensemble needs at least one element"));
    }
    let k = x.k() as f64;
    let parts = ensemble
        .par_iter()
        .map(|s| {
            if s.k() != x.k() {
                return Err(Error::SizeMismatch { expected: x.k(), found: s.k() });
            }
            let c = cost_matrix(space, x.points(), s.points(), p)?;
            Ok(solve_assignment(&c).cost / k)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum())
}

fn data_scale<G: GroundSpace>(space: &G, ensemble: &[Configuration<G::Point>], seed: &Configuration<G::Point>) -> f64 {
    let anchor = &seed[0];
    ensemble
        .iter()
        .flat_map(|s| s.iter())
        .map(|pt| space.distance(anchor, pt))
        .fold(0.0, f64::max)
}

fn matched_sets<P: Clone>(ensemble: &[Configuration<P>], perms: &[&[usize]], k: usize) -> Vec<Vec<P>> {
    (0..k)
        .map(|i| ensemble.iter().zip(perms).map(|(s, perm)| s[perm[i]].clone()).collect())
        .collect()
}

/// Apply the ground descent operator coordinatewise. Returns the new
/// configuration and the largest coordinate move.
fn descend<G: GroundSpace>(
    space: &G,
    ensemble: &[Configuration<G::Point>],
    perms: &[&[usize]],
    x: &Configuration<G::Point>,
    p: f64,
) -> Result<(Configuration<G::Point>, f64)> {
    let sets = matched_sets(ensemble, perms, x.k());
    let next = sets
        .par_iter()
        .zip(x.points().par_iter())
        .map(|(set, xi)| space.descent(set, xi, p))
        .collect::<Result<Vec<_>>>()?;
    let moved = next
        .iter()
        .zip(x.iter())
        .map(|(a, b)| space.distance(a, b))
        .fold(0.0, f64::max);
    Ok((Configuration::new(next)?, moved))
}

fn solve_all<G: GroundSpace>(
    space: &G,
    ensemble: &[Configuration<G::Point>],
    x: &Configuration<G::Point>,
    p: f64,
) -> Result<Vec<Matching>> {
    ensemble
        .par_iter()
        .map(|s| Ok(solve_assignment(&cost_matrix(space, x.points(), s.points(), p)?)))
        .collect()
}

fn enumerate_all<G: GroundSpace>(
    space: &G,
    ensemble: &[Configuration<G::Point>],
    x: &Configuration<G::Point>,
    params: &BarycenterParams,
) -> Result<Vec<MatchingSet>> {
    let sets = ensemble
        .par_iter()
        .map(|s| enumerate_optimal(&cost_matrix(space, x.points(), s.points(), params.p)?, params.cost_tol, params.limits))
        .collect::<Result<Vec<_>>>()?;
    let mut product: usize = 1;
    for set in &sets {
        product = product.saturating_mul(set.len());
        if product > params.limits.max_matchings {
            return Err(Error::EnumerationCap(format!(
                "product of optimal matching sets exceeds {}",
                params.limits.max_matchings
            )));
        }
    }
    Ok(sets)
}

/// Odometer over the product of matching sets, first factor slowest.
fn advance(odometer: &mut [usize], sizes: &[usize]) -> bool {
    for pos in (0..odometer.len()).rev() {
        odometer[pos] += 1;
        if odometer[pos] < sizes[pos] {
            return true;
        }
        odometer[pos] = 0;
    }
    false
}

fn labelings_for<P: Clone>(ensemble: &[Configuration<P>], matchings: Vec<Matching>) -> Vec<ElementLabeling<P>> {
    ensemble
        .iter()
        .zip(matchings)
        .map(|(s, m)| ElementLabeling { representative: s.reordered(&m.permutation), matching: m })
        .collect()
}

/// Compute a local p-barycenter of `ensemble` starting from `seed`.
///
/// A run that reaches `max_iters` returns its last iterate with
/// `diagnostics.converged == false`.
pub fn local_barycenter<G: GroundSpace>(
    space: &G,
    ensemble: &[Configuration<G::Point>],
    seed: &Configuration<G::Point>,
    params: &BarycenterParams,
) -> Result<BarycenterResult<G::Point>> {
    params.validate()?;
    validate_ensemble(space, ensemble, seed)?;
    let p = params.p;
    let conv_tol = params
        .conv_tol
        .unwrap_or_else(|| 1e-9 * (1.0 + data_scale(space, ensemble, seed)));

    let mut x = seed.clone();
    let mut prev: Option<(Configuration<G::Point>, Vec<Matching>)> = None;
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut stagnated = false;

    let final_matchings = loop {
        let matchings = solve_all(space, ensemble, &x, p)?;
        let d: f64 = matchings.iter().map(|m| m.cost).sum();

        if let Some(&last) = trace.last() {
            if d > last * (1.0 - params.stagnation_rel) {
                stagnated = true;
                converged = true;
                if d > last {
                    // Float noise pushed D up: keep the previous iterate.
                    let (px, pm) = prev.take().expect("previous iterate recorded");
                    x = px;
                    break pm;
                }
                trace.push(d);
                break matchings;
            }
        }
        trace.push(d);
        log::debug!("iteration {}: D = {d}", trace.len());

        let step = match params.mode {
            Mode::Single => {
                let perms: Vec<&[usize]> = matchings.iter().map(|m| m.permutation.as_slice()).collect();
                let (next, moved) = descend(space, ensemble, &perms, &x, p)?;
                (moved > conv_tol).then_some(next)
            }
            Mode::Exhaustive => exhaustive_step(space, ensemble, &x, params, conv_tol)?,
        };
        let Some(next) = step else {
            converged = true;
            break matchings;
        };
        if trace.len() >= params.max_iters {
            break matchings;
        }
        prev = Some((std::mem::replace(&mut x, next), matchings));
    };

    Ok(BarycenterResult {
        labelings: labelings_for(ensemble, final_matchings),
        barycenter: x,
        diagnostics: IterationDiagnostics {
            iterations: trace.len(),
            d_trace: trace,
            converged,
            stagnated,
            mode: params.mode,
            conv_tol,
        },
    })
}

/// One pass over the product of optimal matching sets. Returns the first
/// update that moves the estimate, or `None` when every choice leaves it fixed.
fn exhaustive_step<G: GroundSpace>(
    space: &G,
    ensemble: &[Configuration<G::Point>],
    x: &Configuration<G::Point>,
    params: &BarycenterParams,
    conv_tol: f64,
) -> Result<Option<Configuration<G::Point>>> {
    let sets = enumerate_all(space, ensemble, x, params)?;
    let sizes: Vec<usize> = sets.iter().map(|s| s.len()).collect();
    let mut odometer = vec![0usize; sets.len()];
    loop {
        let perms: Vec<&[usize]> = sets
            .iter()
            .zip(&odometer)
            .map(|(s, &idx)| s.matchings[idx].permutation.as_slice())
            .collect();
        let (next, moved) = descend(space, ensemble, &perms, x, params.p)?;
        if moved > conv_tol {
            return Ok(Some(next));
        }
        if !advance(&mut odometer, &sizes) {
            return Ok(None);
        }
    }
}

/// A coordinate that failed the local-barycenter test for some choice of
/// optimal matchings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityFailure {
    /// Index into each element's optimal matching set.
    pub choice: Vec<usize>,
    pub coordinate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub stationary: bool,
    /// Number of matching combinations examined.
    pub combinations: usize,
    /// First failures found (at most 64 are kept).
    pub failures: Vec<StationarityFailure>,
}

/// True iff, for every choice of optimal matchings and every coordinate `i`,
/// `x_i` is a local p-barycenter of the points matched to it.
pub fn verify_stationary<G: GroundSpace>(
    space: &G,
    ensemble: &[Configuration<G::Point>],
    x: &Configuration<G::Point>,
    params: &BarycenterParams,
    tol: f64,
) -> Result<StationarityReport> {
    validate_ensemble(space, ensemble, x)?;
    let sets = enumerate_all(space, ensemble, x, params)?;
    let sizes: Vec<usize> = sets.iter().map(|s| s.len()).collect();
    let mut odometer = vec![0usize; sets.len()];
    let mut failures = Vec::new();
    let mut combinations = 0usize;
    let mut stationary = true;
    loop {
        combinations += 1;
        let perms: Vec<&[usize]> = sets
            .iter()
            .zip(&odometer)
            .map(|(s, &idx)| s.matchings[idx].permutation.as_slice())
            .collect();
        for (i, set) in matched_sets(ensemble, &perms, x.k()).iter().enumerate() {
            if !space.is_local_barycenter(set, &x[i], params.p, tol) {
                stationary = false;
                if failures.len() < 64 {
                    failures.push(StationarityFailure { choice: odometer.clone(), coordinate: i });
                }
            }
        }
        if !advance(&mut odometer, &sizes) {
            break;
        }
    }
    Ok(StationarityReport { stationary, combinations, failures })
}

/// [`verify_stationary`], falling back to the single lexicographic optimal
/// matching per element when enumeration exceeds its caps.
pub fn is_stationary_lenient<G: GroundSpace>(
    space: &G,
    ensemble: &[Configuration<G::Point>],
    x: &Configuration<G::Point>,
    params: &BarycenterParams,
    tol: f64,
) -> bool {
    match verify_stationary(space, ensemble, x, params, tol) {
        Ok(report) => report.stationary,
        Err(Error::EnumerationCap(_)) => {
            let Ok(matchings) = solve_all(space, ensemble, x, params.p) else {
                return false;
            };
            let perms: Vec<&[usize]> = matchings.iter().map(|m| m.permutation.as_slice()).collect();
            matched_sets(ensemble, &perms, x.k())
                .iter()
                .enumerate()
                .all(|(i, set)| space.is_local_barycenter(set, &x[i], params.p, tol))
        }
        Err(_) => false,
    }
}

/// Descent operator on `SP^M X`: a full inner local-barycenter run seeded at `x`.
pub fn nested_descent<G: GroundSpace>(
    inner: &G,
    set: &[Configuration<G::Point>],
    x: &Configuration<G::Point>,
    p: f64,
    params: &BarycenterParams,
) -> Result<Configuration<G::Point>> {
    let params = BarycenterParams { p, ..params.clone() };
    let res = local_barycenter(inner, set, x, &params)?;
    if !res.diagnostics.converged {
        log::warn!(
            "inner barycenter stopped after {} iterations without converging",
            res.diagnostics.iterations
        );
    }
    Ok(res.barycenter)
}

/// One free-support update for uniform measures with a fixed number of atoms:
/// every atom of `x` moves to the average, over the measures in `set`, of the
/// barycentric projection of its mass under an exact optimal plan.
pub fn fixed_size_barycenter_descent(
    set: &[UniformAtomicMeasure<Vec<f64>>],
    x: &UniformAtomicMeasure<Vec<f64>>,
) -> Result<UniformAtomicMeasure<Vec<f64>>> {
    if set.is_empty() {
        return Err(Error::Empty("descent needs a nonempty set"));
    }
    let space = Euclidean::any_dim();
    let m = x.len();
    let dim = x.atoms()[0].len();
    let projections = set
        .par_iter()
        .map(|nu| {
            let ot = uniform_discrete_ot(&space, x, nu, 2.0)?;
            let mut proj = vec![vec![0.0; dim]; m];
            for (a, row) in ot.plan.iter().enumerate() {
                for (b, &mass) in row.iter().enumerate() {
                    if mass > 0.0 {
                        let y = &nu.atoms()[b];
                        if y.len() != dim {
                            return Err(Error::DimensionMismatch { expected: dim, found: y.len() });
                        }
                        for (acc, v) in proj[a].iter_mut().zip(y) {
                            *acc += mass * v;
                        }
                    }
                }
            }
            Ok(proj)
        })
        .collect::<Result<Vec<_>>>()?;
    let weight = m as f64 / set.len() as f64;
    let mut atoms = vec![vec![0.0; dim]; m];
    for proj in &projections {
        for (acc, p) in atoms.iter_mut().zip(proj) {
            for (a, v) in acc.iter_mut().zip(p) {
                *a += weight * v;
            }
        }
    }
    let scale = 1.0 + x.atoms().iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    let moved = atoms
        .iter()
        .zip(x.atoms())
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if moved <= 1e-13 * scale {
        return Ok(x.clone());
    }
    UniformAtomicMeasure::new(atoms)
}

/// Fréchet value restricted to a fixed measure: `sum_nu W_2(x, nu)^2`.
pub fn measure_frechet_value(set: &[UniformAtomicMeasure<Vec<f64>>], x: &UniformAtomicMeasure<Vec<f64>>) -> Result<f64> {
    let space = Euclidean::any_dim();
    let parts = set
        .par_iter()
        .map(|nu| uniform_discrete_ot(&space, x, nu, 2.0).map(|r| r.cost))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.iter().sum())
}
