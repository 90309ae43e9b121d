//! The symmetric product `SP^k X`: configurations, the `W_p` metric, matched
//! geodesics, the diagonal embedding, and exact optimal transport between
//! uniform atomic measures of possibly different support sizes.
//!
//! `W_p([a], [b])^p = (1/k) min_pi sum_i d(a_i, b_pi(i))^p`. The `1/k` factor
//! belongs to the distance; raw assignment costs (no `1/k`) are what the
//! barycenter iteration compares.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{solve_assignment, CostMatrix, Matching};
use crate::error::{Error, Result};
use crate::metric::{powp, GroundSpace};

/// An unordered k-tuple of ground points, stored in an arbitrary order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration<P> {
    points: Vec<P>,
}

impl<P> Configuration<P> {
    pub fn new(points: Vec<P>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("configuration needs k >= 1 points"));
        }
        Ok(Self { points })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn points(&self) -> &[P] {
        &self.points
    }

    pub fn into_points(self) -> Vec<P> {
        self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, P> {
        self.points.iter()
    }
}

impl<P: Clone> Configuration<P> {
    /// The representative whose i-th point is `self[perm[i]]`.
    pub fn reordered(&self, perm: &[usize]) -> Self {
        Self { points: perm.iter().map(|&j| self.points[j].clone()).collect() }
    }

    /// The first `len` points.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        Self::new(self.points[..len.min(self.points.len())].to_vec())
    }
}

impl<P> std::ops::Index<usize> for Configuration<P> {
    type Output = P;

    fn index(&self, i: usize) -> &P {
        &self.points[i]
    }
}

/// Uniform probability measure on a list of atoms (repeats accumulate mass).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UniformAtomicMeasure<P> {
    atoms: Vec<P>,
}

impl<P> UniformAtomicMeasure<P> {
    pub fn new(atoms: Vec<P>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Empty("measure needs at least one atom"));
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[P] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Mass carried by each stored atom.
    pub fn atom_mass(&self) -> f64 {
        1.0 / self.atoms.len() as f64
    }
}

/// `entries(i, j) = d(x_i, y_j)^p`. Rows are filled in parallel; the result
/// does not depend on the thread count.
pub fn cost_matrix<G: GroundSpace>(space: &G, x: &[G::Point], y: &[G::Point], p: f64) -> Result<CostMatrix> {
    if x.len() != y.len() {
        return Err(Error::SizeMismatch { expected: x.len(), found: y.len() });
    }
    let k = x.len();
    let row = |i: usize| -> Vec<f64> { y.iter().map(|b| powp(space.distance(&x[i], b), p)).collect() };
    let rows: Vec<Vec<f64>> = if k * k >= 16 {
        (0..k).into_par_iter().map(row).collect()
    } else {
        (0..k).map(row).collect()
    };
    CostMatrix::new(k, rows.into_iter().flatten().collect())
}

/// `W_p` distance between two configurations and the optimal matching
/// realizing it (`a_i` is matched to `b_{perm[i]}`).
pub fn wp_distance<G: GroundSpace>(
    space: &G,
    a: &Configuration<G::Point>,
    b: &Configuration<G::Point>,
    p: f64,
) -> Result<(f64, Matching)> {
    if a.k() != b.k() {
        return Err(Error::SizeMismatch { expected: a.k(), found: b.k() });
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p = {p} must be a finite real >= 1")));
    }
    let c = cost_matrix(space, a.points(), b.points(), p)?;
    let m = solve_assignment(&c);
    Ok((root_p(m.cost / a.k() as f64, p), m))
}

/// [`wp_distance`] for callers that have already checked shapes.
pub(crate) fn wp_distance_unchecked<G: GroundSpace>(
    space: &G,
    a: &Configuration<G::Point>,
    b: &Configuration<G::Point>,
    p: f64,
) -> (f64, Matching) {
    wp_distance(space, a, b, p).expect("configuration sizes validated by caller")
}

#[inline]
pub(crate) fn root_p(v: f64, p: f64) -> f64 {
    if p == 2.0 {
        v.max(0.0).sqrt()
    } else if p == 1.0 {
        v
    } else {
        v.max(0.0).powf(1.0 / p)
    }
}

/// `x -> (x, ..., x)`, an isometric embedding of `X` into `SP^k X`.
pub fn diag_embed<P: Clone>(x: &P, k: usize) -> Result<Configuration<P>> {
    Configuration::new(vec![x.clone(); k])
}

/// Point at time `t` on the geodesic obtained by moving every matched pair
/// along a ground geodesic. The output is ordered like `a`.
pub fn matched_geodesic<G: GroundSpace>(
    space: &G,
    a: &Configuration<G::Point>,
    b: &Configuration<G::Point>,
    t: f64,
    p: f64,
) -> Result<Configuration<G::Point>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("geodesic time {t} outside [0, 1]")));
    }
    let (_, m) = wp_distance(space, a, b, p)?;
    let points = a
        .iter()
        .zip(&m.permutation)
        .map(|(ai, &j)| space.geodesic(ai, &b[j], t))
        .collect::<Result<Vec<_>>>()?;
    Configuration::new(points)
}

/// `[x] -> (1/k) sum_i delta_{x_i}`.
pub fn to_measure<P: Clone>(a: &Configuration<P>) -> UniformAtomicMeasure<P> {
    UniformAtomicMeasure { atoms: a.points().to_vec() }
}

/// Exact optimal transport between two uniform atomic measures.
#[derive(Debug, Clone, PartialEq)]
pub struct OtResult {
    /// `W_p(mu, nu)`.
    pub distance: f64,
    /// `W_p(mu, nu)^p = sum_ij plan_ij d(mu_i, nu_j)^p`.
    pub cost: f64,
    /// Dense `n x m` transport plan; row sums `1/n`, column sums `1/m`.
    pub plan: Vec<Vec<f64>>,
}

/// Largest integer scale used for the flow formulation.
const MAX_FLOW_SCALE: u64 = 1 << 40;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Exact `W_p` between uniform measures with `n` and `m` atoms, solved as an
/// integer min-cost flow with supplies `L/n` and demands `L/m`, `L = lcm(n, m)`.
pub fn uniform_discrete_ot<G: GroundSpace>(
    space: &G,
    mu: &UniformAtomicMeasure<G::Point>,
    nu: &UniformAtomicMeasure<G::Point>,
    p: f64,
) -> Result<OtResult> {
    let n = mu.len();
    let m = nu.len();
    if n == 0 || m == 0 {
        return Err(Error::Empty("transport between empty measures"));
    }
    let (nn, mm) = (n as u64, m as u64);
    let scale = nn / gcd(nn, mm) * mm;
    if scale > MAX_FLOW_SCALE {
        return Err(Error::InvalidParameter(format!("lcm({n}, {m}) too large for exact transport")));
    }
    let cost: Vec<Vec<f64>> = mu
        .atoms()
        .par_iter()
        .map(|a| nu.atoms().iter().map(|b| powp(space.distance(a, b), p)).collect())
        .collect();
    let flow = transport_flow(&cost, (scale / nn) as i64, (scale / mm) as i64);
    let inv = 1.0 / scale as f64;
    let plan: Vec<Vec<f64>> = flow.iter().map(|row| row.iter().map(|&f| f as f64 * inv).collect()).collect();
    let total: f64 = plan
        .iter()
        .zip(&cost)
        .map(|(pr, cr)| pr.iter().zip(cr).map(|(f, c)| f * c).sum::<f64>())
        .sum();
    Ok(OtResult { distance: root_p(total, p), cost: total, plan })
}

/// Successive shortest paths (Dijkstra with Johnson potentials) on the
/// complete bipartite transport network with a super-source and super-sink.
/// Every source holds `supply` units, every sink wants `demand` units.
fn transport_flow(cost: &[Vec<f64>], supply: i64, demand: i64) -> Vec<Vec<i64>> {
    let n = cost.len();
    let m = cost[0].len();
    // Node layout: sources 0..n, sinks n..n+m, super-source s, super-sink t.
    let s = n + m;
    let t = s + 1;
    let v = t + 1;
    let mut flow = vec![vec![0i64; m]; n];
    let mut left = vec![supply; n];
    let mut want = vec![demand; m];
    let mut pot = vec![0.0f64; v];
    let total = supply * n as i64;
    let mut shipped = 0i64;
    while shipped < total {
        let mut dist = vec![f64::INFINITY; v];
        let mut prev = vec![usize::MAX; v];
        let mut done = vec![false; v];
        dist[s] = 0.0;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for (x, &d) in dist.iter().enumerate() {
                if !done[x] && d < best {
                    best = d;
                    u = x;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u == t {
                break;
            }
            let relax = |w: usize, arc: f64, dist: &mut [f64], prev: &mut [usize]| {
                let rc = (arc + pot[u] - pot[w]).max(0.0);
                if best + rc < dist[w] {
                    dist[w] = best + rc;
                    prev[w] = u;
                }
            };
            if u == s {
                for i in 0..n {
                    if left[i] > 0 {
                        relax(i, 0.0, &mut dist, &mut prev);
                    }
                }
            } else if u < n {
                for j in 0..m {
                    relax(n + j, cost[u][j], &mut dist, &mut prev);
                }
            } else if u < s {
                let j = u - n;
                for i in 0..n {
                    if flow[i][j] > 0 {
                        relax(i, -cost[i][j], &mut dist, &mut prev);
                    }
                }
                if want[j] > 0 {
                    relax(t, 0.0, &mut dist, &mut prev);
                }
            }
        }
        assert!(dist[t].is_finite(), "transport network disconnected");
        // Nodes not settled before t are capped at dist[t]; reduced costs
        // stay nonnegative.
        let dt = dist[t];
        for x in 0..v {
            pot[x] += dist[x].min(dt);
        }
        let mut path = Vec::new();
        let mut node = t;
        while node != s {
            let from = prev[node];
            path.push((from, node));
            node = from;
        }
        let mut bottleneck = i64::MAX;
        for &(from, to) in &path {
            let cap = if from == s {
                left[to]
            } else if to == t {
                want[from - n]
            } else if from < n {
                i64::MAX
            } else {
                flow[to][from - n]
            };
            bottleneck = bottleneck.min(cap);
        }
        for &(from, to) in &path {
            if from == s {
                left[to] -= bottleneck;
            } else if to == t {
                want[from - n] -= bottleneck;
            } else if from < n {
                flow[from][to - n] += bottleneck;
            } else {
                flow[to][from - n] -= bottleneck;
            }
        }
        shipped += bottleneck;
    }
    flow
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{Angle, Circle, Euclidean};
    use approx::assert_abs_diff_eq;

    fn line(v: &[f64]) -> Configuration<Vec<f64>> {
        Configuration::new(v.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn wp_distance_on_the_line() {
        let e = Euclidean::new(1);
        let (d, m) = wp_distance(&e, &line(&[1.0, 3.0]), &line(&[0.0, 2.0]), 2.0).unwrap();
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-15);
        assert_eq!(m.permutation, vec![0, 1]);
        let (d, m) = wp_distance(&e, &line(&[3.0, 1.0]), &line(&[0.0, 2.0]), 2.0).unwrap();
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-15);
        assert_eq!(m.permutation, vec![1, 0]);
    }

    #[test]
    fn wp_distance_identity_and_diagonal() {
        let e = Euclidean::new(2);
        let a = Configuration::new(vec![vec![0.0, 1.0], vec![2.0, 2.0], vec![-1.0, 0.5]]).unwrap();
        let (d, m) = wp_distance(&e, &a, &a, 2.0).unwrap();
        assert_eq!(d, 0.0);
        assert!(m.is_identity());
        let x = vec![1.0, 2.0];
        let y = vec![4.0, 6.0];
        for k in 1..6 {
            let (d, _) = wp_distance(&e, &diag_embed(&x, k).unwrap(), &diag_embed(&y, k).unwrap(), 2.0).unwrap();
            assert_abs_diff_eq!(d, 5.0, epsilon = 1e-12);
        }
        assert_eq!(diag_embed(&x, 3).unwrap().points(), &[x.clone(), x.clone(), x.clone()]);
        assert_eq!(diag_embed(&x, 1).unwrap().k(), 1);
        assert!(diag_embed(&x, 0).is_err());
    }

    #[test]
    fn wp_distance_size_mismatch() {
        let e = Euclidean::new(1);
        assert_eq!(
            wp_distance(&e, &line(&[1.0]), &line(&[1.0, 2.0]), 2.0).unwrap_err(),
            Error::SizeMismatch { expected: 1, found: 2 }
        );
    }

    #[test]
    fn geodesic_endpoints_and_midpoint() {
        let e = Euclidean::new(1);
        let a = line(&[0.0, 10.0]);
        let b = line(&[12.0, 2.0]);
        assert_eq!(matched_geodesic(&e, &a, &b, 0.0, 2.0).unwrap(), a);
        assert_eq!(matched_geodesic(&e, &a, &b, 1.0, 2.0).unwrap(), line(&[2.0, 12.0]));
        assert_eq!(matched_geodesic(&e, &a, &b, 0.5, 2.0).unwrap(), line(&[1.0, 11.0]));
        assert!(matched_geodesic(&e, &a, &b, 1.5, 2.0).is_err());
    }

    #[test]
    fn circle_geodesic_takes_the_short_arc() {
        let a = Configuration::new(vec![Angle::new(3.0)]).unwrap();
        let b = Configuration::new(vec![Angle::new(-3.0)]).unwrap();
        let mid = matched_geodesic(&Circle, &a, &b, 0.5, 2.0).unwrap();
        assert_abs_diff_eq!(mid[0].radians().abs(), std::f64::consts::PI, epsilon = 1e-12);
    }

    #[test]
    fn measures() {
        let x = vec![1.0];
        let mu = to_measure(&Configuration::new(vec![x.clone(), x.clone()]).unwrap());
        assert_eq!(mu.len(), 2);
        assert_eq!(mu.atom_mass(), 0.5);
        let e = Euclidean::new(1);
        let a = UniformAtomicMeasure::new(vec![vec![0.0]]).unwrap();
        let b = UniformAtomicMeasure::new(vec![vec![-1.0], vec![1.0]]).unwrap();
        let ot = uniform_discrete_ot(&e, &a, &b, 2.0).unwrap();
        assert_abs_diff_eq!(ot.cost, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ot.distance, 1.0, epsilon = 1e-15);
        assert_eq!(ot.plan, vec![vec![0.5, 0.5]]);
    }

    #[test]
    fn ot_on_coincident_supports_is_diagonal() {
        let e = Euclidean::new(2);
        let pts = vec![vec![0.0, 0.0], vec![1.0, 5.0], vec![-3.0, 2.0]];
        let mu = UniformAtomicMeasure::new(pts.clone()).unwrap();
        let ot = uniform_discrete_ot(&e, &mu, &mu, 2.0).unwrap();
        assert_eq!(ot.distance, 0.0);
        for (i, row) in ot.plan.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_abs_diff_eq!(v, if i == j { 1.0 / 3.0 } else { 0.0 }, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn ot_plan_marginals_with_unequal_sizes() {
        let e = Euclidean::new(2);
        let mu = UniformAtomicMeasure::new((0..7).map(|i| vec![i as f64, (i * i) as f64 * 0.1]).collect()).unwrap();
        let nu = UniformAtomicMeasure::new((0..3).map(|i| vec![2.0 * i as f64, 1.0]).collect()).unwrap();
        let ot = uniform_discrete_ot(&e, &mu, &nu, 2.0).unwrap();
        for row in &ot.plan {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0 / 7.0, epsilon = 1e-12);
        }
        for j in 0..3 {
            assert_abs_diff_eq!(ot.plan.iter().map(|r| r[j]).sum::<f64>(), 1.0 / 3.0, epsilon = 1e-12);
        }
    }
}
