//! Exact square assignment: a shortest-augmenting-path Hungarian solver with
//! dual potentials, a lexicographic tie-break over the optimal face, and an
//! enumerator of every optimal bijection.
//!
//! Optimal bijections are exactly the perfect matchings of the bipartite graph
//! of zero-reduced-cost edges under any optimal dual solution, so both the
//! tie-break and the enumeration work inside that graph. Floating-point costs
//! are compared with an absolute tolerance `cost_tol`; see [`default_cost_tol`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square matrix of nonnegative finite costs, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    k: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn new(k: usize, entries: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidCost("k must be positive".into()));
        }
        if entries.len() != k * k {
            return Err(Error::InvalidCost(format!(
                "expected {} entries for k = {k}, got {}",
                k * k,
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::InvalidCost(format!("entry {bad} is not a finite nonnegative real")));
        }
        Ok(Self { k, entries })
    }

    pub fn from_fn(k: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                entries.push(f(i, j));
            }
        }
        Self::new(k, entries)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::InvalidCost(format!("row of length {} in a {k}x{k} matrix", r.len())));
        }
        Self::new(k, rows.iter().flatten().copied().collect())
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.k + j]
    }

    /// Total cost of the bijection `i -> perm[i]`.
    /// Total cost of `perm`. Entries are summed in ascending order, so the
    /// result depends only on the multiset of matched entries (in particular
    /// it is unchanged by transposing the matrix).
    pub fn cost_of(&self, perm: &[usize]) -> f64 {
        let mut parts: Vec<f64> = perm.iter().enumerate().map(|(i, &j)| self.get(i, j)).collect();
        parts.sort_by(f64::total_cmp);
        parts.iter().sum()
    }
}

/// A bijection `i -> permutation[i]` of `{0..k}` together with its total cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub permutation: Vec<usize>,
    pub cost: f64,
}

impl Matching {
    pub fn is_identity(&self) -> bool {
        self.permutation.iter().enumerate().all(|(i, &j)| i == j)
    }
}

/// Every bijection whose cost is within `cost_tol` of the optimum, in
/// lexicographic order of permutations.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingSet {
    pub optimum: f64,
    pub cost_tol: f64,
    pub matchings: Vec<Matching>,
}

impl MatchingSet {
    pub fn len(&self) -> usize {
        self.matchings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matchings.is_empty()
    }
}

/// Hard limits on optimal-matching enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationLimits {
    /// Largest `k` for which enumeration is attempted.
    pub max_k: usize,
    /// Largest number of optimal matchings (or matching tuples) materialized.
    pub max_matchings: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        Self { max_k: 10, max_matchings: 100_000 }
    }
}

/// Relative tolerance used to decide that two matchings are equally optimal.
pub fn default_cost_tol(optimum: f64) -> f64 {
    1e-9 * (1.0 + optimum.abs())
}

/// Optimal assignment with dual potentials, before any tie-breaking.
struct DualSolution {
    row_to_col: Vec<usize>,
    row_pot: Vec<f64>,
    col_pot: Vec<f64>,
}

impl DualSolution {
    #[inline]
    fn reduced(&self, c: &CostMatrix, i: usize, j: usize) -> f64 {
        c.get(i, j) - self.row_pot[i] - self.col_pot[j]
    }
}

/// O(k^3) Hungarian method (shortest augmenting paths with potentials).
fn hungarian(c: &CostMatrix) -> DualSolution {
    let n = c.k();
    // 1-based internals, index 0 is the virtual root column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = c.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[owner[j] - 1] = j - 1;
    }
    DualSolution { row_to_col, row_pot: u[1..].to_vec(), col_pot: v[1..].to_vec() }
}

/// Zero-reduced-cost adjacency (columns ascending per row).
fn tight_graph(c: &CostMatrix, dual: &DualSolution, tol: f64) -> Vec<Vec<usize>> {
    let n = c.k();
    (0..n)
        .map(|i| (0..n).filter(|&j| dual.reduced(c, i, j) <= tol).collect())
        .collect()
}

/// Move the lexicographically smallest tight perfect matching into `row_to_col`.
fn lexicographic_refine(
    c: &CostMatrix,
    tight: &[Vec<usize>],
    row_to_col: &mut [usize],
    optimum: f64,
    tol: f64,
) {
    let n = c.k();
    let mut col_to_row = vec![0usize; n];
    for (i, &j) in row_to_col.iter().enumerate() {
        col_to_row[j] = i;
    }
    let mut fixed = vec![false; n];
    for r in 0..n {
        for &j in &tight[r] {
            if row_to_col[r] == j {
                break;
            }
            let owner = col_to_row[j];
            if fixed[owner] {
                continue;
            }
            // Alternating path from `owner` to r's current column, avoiding
            // fixed rows, column j and row r.
            let target = row_to_col[r];
            if let Some(path) = alternating_path(tight, row_to_col, &col_to_row, &fixed, owner, j, r, target) {
                let mut trial = row_to_col.to_vec();
                trial[r] = j;
                for &(row, col) in &path {
                    trial[row] = col;
                }
                if c.cost_of(&trial) <= optimum + tol {
                    row_to_col.copy_from_slice(&trial);
                    for (i, &jj) in row_to_col.iter().enumerate() {
                        col_to_row[jj] = i;
                    }
                    break;
                }
            }
        }
        fixed[r] = true;
    }
}

/// DFS for a sequence of (row, new column) reassignments starting at `start`
/// that ends by taking column `target`.
#[allow(clippy::too_many_arguments)]
fn alternating_path(
    tight: &[Vec<usize>],
    row_to_col: &[usize],
    col_to_row: &[usize],
    fixed: &[bool],
    start: usize,
    banned_col: usize,
    banned_row: usize,
    target: usize,
) -> Option<Vec<(usize, usize)>> {
    let n = row_to_col.len();
    let mut seen = vec![false; n];
    seen[banned_col] = true;
    let mut path = Vec::new();
    fn dfs(
        row: usize,
        tight: &[Vec<usize>],
        col_to_row: &[usize],
        fixed: &[bool],
        banned_row: usize,
        target: usize,
        seen: &mut [bool],
        path: &mut Vec<(usize, usize)>,
    ) -> bool {
        for &col in &tight[row] {
            if seen[col] {
                continue;
            }
            seen[col] = true;
            path.push((row, col));
            if col == target {
                return true;
            }
            let next = col_to_row[col];
            if !fixed[next] && next != banned_row && dfs(next, tight, col_to_row, fixed, banned_row, target, seen, path) {
                return true;
            }
            path.pop();
        }
        false
    }
    if dfs(start, tight, col_to_row, fixed, banned_row, target, &mut seen, &mut path) {
        Some(path)
    } else {
        None
    }
}

/// Minimum-cost bijection. Among matchings within [`default_cost_tol`] of the
/// optimum, the lexicographically smallest permutation is returned.
pub fn solve_assignment(c: &CostMatrix) -> Matching {
    let dual = hungarian(c);
    let optimum = c.cost_of(&dual.row_to_col);
    let tol = default_cost_tol(optimum);
    let tight = tight_graph(c, &dual, tol);
    let mut perm = dual.row_to_col.clone();
    lexicographic_refine(c, &tight, &mut perm, optimum, tol);
    let cost = c.cost_of(&perm);
    Matching { permutation: perm, cost }
}

/// Optimal cost only (no tie-breaking).
pub fn optimal_cost(c: &CostMatrix) -> f64 {
    let dual = hungarian(c);
    c.cost_of(&dual.row_to_col)
}

/// Depth-first enumeration of tight perfect matchings, lexicographic order.
/// Stops after `max_results + 1` hits so callers can detect truncation.
fn enumerate_tight(c: &CostMatrix, cost_tol: Option<f64>, max_results: usize) -> (MatchingSet, bool) {
    let dual = hungarian(c);
    let n = c.k();
    let optimum = c.cost_of(&dual.row_to_col);
    let tol = cost_tol.unwrap_or_else(|| default_cost_tol(optimum));
    let tight = tight_graph(c, &dual, tol);

    struct Search<'a> {
        c: &'a CostMatrix,
        dual: &'a DualSolution,
        tight: &'a [Vec<usize>],
        used: Vec<bool>,
        perm: Vec<usize>,
        out: Vec<Matching>,
        optimum: f64,
        tol: f64,
        cap: usize,
    }
    impl Search<'_> {
        fn go(&mut self, row: usize, slack: f64) -> bool {
            if self.out.len() > self.cap {
                return false;
            }
            if row == self.perm.len() {
                let cost = self.c.cost_of(&self.perm);
                if cost <= self.optimum + self.tol {
                    self.out.push(Matching { permutation: self.perm.clone(), cost });
                }
                return self.out.len() <= self.cap;
            }
            for idx in 0..self.tight[row].len() {
                let col = self.tight[row][idx];
                if self.used[col] {
                    continue;
                }
                let s = slack + self.dual.reduced(self.c, row, col).max(0.0);
                if s > self.tol {
                    continue;
                }
                self.used[col] = true;
                self.perm[row] = col;
                let keep_going = self.go(row + 1, s);
                self.used[col] = false;
                if !keep_going {
                    return false;
                }
            }
            true
        }
    }
    let mut search = Search {
        c,
        dual: &dual,
        tight: &tight,
        used: vec![false; n],
        perm: vec![0; n],
        out: Vec::new(),
        optimum,
        tol,
        cap: max_results,
    };
    search.go(0, 0.0);
    let truncated = search.out.len() > max_results;
    let mut matchings = search.out;
    matchings.truncate(max_results);
    (MatchingSet { optimum, cost_tol: tol, matchings }, truncated)
}

/// All bijections whose cost lies within `cost_tol` of the optimum
/// (`None` selects [`default_cost_tol`]), in lexicographic order.
pub fn enumerate_optimal(
    c: &CostMatrix,
    cost_tol: Option<f64>,
    limits: EnumerationLimits,
) -> Result<MatchingSet> {
    if c.k() > limits.max_k {
        return Err(Error::EnumerationCap(format!(
            "k = {} exceeds the enumeration cap of {}",
            c.k(),
            limits.max_k
        )));
    }
    let (set, truncated) = enumerate_tight(c, cost_tol, limits.max_matchings);
    if truncated {
        return Err(Error::EnumerationCap(format!(
            "more than {} optimal matchings",
            limits.max_matchings
        )));
    }
    Ok(set)
}

/// Up to `max_results` optimal matchings, without the `k` cap. The flag is
/// true when more optimal matchings exist than were returned.
pub fn enumerate_optimal_truncated(c: &CostMatrix, cost_tol: Option<f64>, max_results: usize) -> (MatchingSet, bool) {
    enumerate_tight(c, cost_tol, max_results)
}
