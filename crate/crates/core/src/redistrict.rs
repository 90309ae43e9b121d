//! Redistricting ensembles as points of `SP^k SP^M R^2`: weighted district
//! sampling, ensemble barycenters, per-label vote-share summaries, heat maps,
//! outlier screening, and the seed and sample-size stability sweeps.
//!
//! Units are addressed by their index in the unit list. District indices are
//! zero-based.

use std::collections::{BTreeMap, VecDeque};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::solve_assignment;
use crate::barycenter::{local_barycenter, BarycenterParams, BarycenterResult};
use crate::error::{Error, Result};
use crate::labeling::{discrepancy, index_by_barycenter, Discrepancy, LabeledEnsemble};
use crate::metric::{Euclidean, NestedSpace};
use crate::stats::BoxSummary;
use crate::symprod::{cost_matrix, Configuration};

/// Version of the JSON input document understood by [`RedistrictInput`].
pub const SCHEMA_VERSION: u32 = 1;
/// Default sample size per district.
pub const DEFAULT_M: usize = 40;
/// Default outlier margin on two-way vote shares.
pub const DEFAULT_OUTLIER_MARGIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerritorialUnit {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub area: f64,
    pub population: u64,
    /// election -> party -> votes
    #[serde(default)]
    pub votes: BTreeMap<String, BTreeMap<String, u64>>,
}

impl TerritorialUnit {
    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite()) {
            return Err(Error::InvalidPoint(format!("unit {} has a non-finite centroid", self.id)));
        }
        if !(self.area >= 0.0 && self.area.is_finite()) {
            return Err(Error::InvalidParameter(format!("unit {} has area {}", self.id, self.area)));
        }
        Ok(())
    }

    pub fn centroid(&self) -> Vec<f64> {
        vec![self.x, self.y]
    }
}

/// District index of every unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Plan {
    pub assignment: Vec<usize>,
}

impl Plan {
    pub fn new(assignment: Vec<usize>) -> Self {
        Self { assignment }
    }

    /// Number of districts, one more than the largest index.
    pub fn k(&self) -> usize {
        self.assignment.iter().max().map_or(0, |m| m + 1)
    }

    pub fn validate(&self, n_units: usize, k: usize) -> Result<()> {
        if self.assignment.len() != n_units {
            return Err(Error::SizeMismatch { expected: n_units, found: self.assignment.len() });
        }
        let mut seen = vec![false; k];
        for &d in &self.assignment {
            if d >= k {
                return Err(Error::InvalidParameter(format!("district index {d} outside 0..{k}")));
            }
            seen[d] = true;
        }
        match seen.iter().position(|s| !s) {
            Some(d) => Err(Error::InvalidParameter(format!("district {d} has no units"))),
            None => Ok(()),
        }
    }

    /// Unit indices of each district.
    pub fn districts(&self, k: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); k];
        for (u, &d) in self.assignment.iter().enumerate() {
            out[d].push(u);
        }
        out
    }

    /// Relabel districts: unit in district `d` moves to district `perm[d]`.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        Self { assignment: self.assignment.iter().map(|&d| perm[d]).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Area,
    #[default]
    Population,
}

impl std::str::FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "area" => Ok(Self::Area),
            "population" => Ok(Self::Population),
            other => Err(Error::InvalidParameter(format!("unknown weighting `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistrictSample {
    pub points: Vec<Vec<f64>>,
    pub weighting: Weighting,
}

/// Draw `m` centroids with replacement, each unit weighted by area or
/// population.
pub fn sample_district(
    units: &[TerritorialUnit],
    district_units: &[usize],
    m: usize,
    weighting: Weighting,
    rng_seed: u64,
) -> Result<DistrictSample> {
    if district_units.is_empty() {
        return Err(Error::Empty("district with no units"));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("sample size M must be positive".into()));
    }
    let weights: Vec<f64> = district_units
        .iter()
        .map(|&u| match weighting {
            Weighting::Area => units[u].area,
            Weighting::Population => units[u].population as f64,
        })
        .collect();
    let dist = WeightedIndex::new(&weights).map_err(|_| Error::ZeroWeight(district_units[0]))?;
    let mut rng = district_rng(rng_seed, district_units);
    let points = (0..m).map(|_| units[district_units[dist.sample(&mut rng)]].centroid()).collect();
    Ok(DistrictSample { points, weighting })
}

/// The stream depends on the district's unit set, not on its index, so a
/// relabeled plan reproduces the same samples.
fn district_rng(rng_seed: u64, district_units: &[usize]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let anchor = district_units.iter().min().copied().unwrap_or(0) as u64;
    rng.set_stream(anchor);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub k: usize,
    pub m: usize,
    pub weighting: Weighting,
    pub rng_seed: u64,
}

/// The plan as a k-tuple of M-point district samples, in district-index
/// order.
pub fn plan_to_configuration(
    plan: &Plan,
    units: &[TerritorialUnit],
    sampling: &SamplingConfig,
) -> Result<Configuration<Configuration<Vec<f64>>>> {
    plan.validate(units.len(), sampling.k)?;
    let districts = plan
        .districts(sampling.k)
        .iter()
        .map(|d| {
            let s = sample_district(units, d, sampling.m, sampling.weighting, sampling.rng_seed)?;
            Configuration::new(s.points)
        })
        .collect::<Result<Vec<_>>>()?;
    Configuration::new(districts)
}

pub fn plans_to_configurations(
    plans: &[Plan],
    units: &[TerritorialUnit],
    sampling: &SamplingConfig,
) -> Result<Vec<Configuration<Configuration<Vec<f64>>>>> {
    units.iter().try_for_each(TerritorialUnit::validate)?;
    plans.par_iter().map(|p| plan_to_configuration(p, units, sampling)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedistrictParams {
    pub sampling: SamplingConfig,
    pub outer: BarycenterParams,
    pub inner: BarycenterParams,
    /// Plan whose configuration seeds the iteration.
    pub seed_plan_index: usize,
}

impl RedistrictParams {
    pub fn new(k: usize) -> Self {
        Self {
            sampling: SamplingConfig { k, m: DEFAULT_M, weighting: Weighting::Population, rng_seed: 0 },
            outer: BarycenterParams::default(),
            inner: BarycenterParams::inner_default(),
            seed_plan_index: 0,
        }
    }

    pub fn space(&self) -> NestedSpace<Euclidean> {
        NestedSpace::new(Euclidean::new(2), self.sampling.m, self.inner.clone())
    }
}

pub type District = Configuration<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRun {
    pub result: BarycenterResult<District>,
    pub labeled: LabeledEnsemble<District>,
}

/// Local barycenter of the plan ensemble, with every plan labeled against it.
pub fn ensemble_barycenter(
    plans: &[Plan],
    units: &[TerritorialUnit],
    params: &RedistrictParams,
) -> Result<EnsembleRun> {
    let configs = plans_to_configurations(plans, units, &params.sampling)?;
    barycenter_of_configurations(&configs, params)
}

pub fn barycenter_of_configurations(
    configs: &[Configuration<District>],
    params: &RedistrictParams,
) -> Result<EnsembleRun> {
    let seed = configs
        .get(params.seed_plan_index)
        .ok_or_else(|| Error::InvalidParameter(format!("seed plan {} out of range", params.seed_plan_index)))?;
    let space = params.space();
    let result = local_barycenter(&space, configs, seed, &params.outer)?;
    let labeled = index_by_barycenter(&space, configs, &result.barycenter, params.outer.p, params.outer.cost_tol)?;
    Ok(EnsembleRun { result, labeled })
}

/// Original district index carrying label `label` in plan `element`.
fn district_of(labeled: &LabeledEnsemble<District>, element: usize, label: usize) -> usize {
    labeled.representatives[element].matching.permutation[label]
}

/// Two-way share `a / (a + b)` of a set of units.
pub fn two_way_share(
    units: &[TerritorialUnit],
    members: &[usize],
    election: &str,
    party_a: &str,
    party_b: &str,
) -> Result<f64> {
    let (mut a, mut b) = (0u64, 0u64);
    for &u in members {
        let e = units[u]
            .votes
            .get(election)
            .ok_or_else(|| Error::MissingElection(format!("{election} (unit {})", units[u].id)))?;
        a += e.get(party_a).copied().unwrap_or(0);
        b += e.get(party_b).copied().unwrap_or(0);
    }
    if a + b == 0 {
        return Err(Error::InvalidParameter(format!("no {party_a}/{party_b} votes in district")));
    }
    Ok(a as f64 / (a + b) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelShares {
    pub label: usize,
    /// Shares across plans, ascending.
    pub shares: Vec<f64>,
    pub summary: BoxSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteShareTable {
    pub election: String,
    pub party_a: String,
    pub party_b: String,
    /// One row per label; ordered by mean share when requested.
    pub rows: Vec<LabelShares>,
}

impl VoteShareTable {
    pub fn row(&self, label: usize) -> Option<&LabelShares> {
        self.rows.iter().find(|r| r.label == label)
    }
}

pub fn vote_share_table(
    labeled: &LabeledEnsemble<District>,
    plans: &[Plan],
    units: &[TerritorialUnit],
    election: &str,
    party_a: &str,
    party_b: &str,
    sort_by_mean: bool,
) -> Result<VoteShareTable> {
    let k = labeled.k();
    if plans.len() != labeled.n() {
        return Err(Error::SizeMismatch { expected: labeled.n(), found: plans.len() });
    }
    let district_sets: Vec<Vec<Vec<usize>>> = plans.iter().map(|p| p.districts(k)).collect();
    let mut rows = (0..k)
        .map(|label| {
            let mut shares = (0..plans.len())
                .map(|e| two_way_share(units, &district_sets[e][district_of(labeled, e, label)], election, party_a, party_b))
                .collect::<Result<Vec<_>>>()?;
            shares.sort_by(f64::total_cmp);
            Ok(LabelShares { label, summary: BoxSummary::of(&shares), shares })
        })
        .collect::<Result<Vec<_>>>()?;
    if sort_by_mean {
        rows.sort_by(|a, b| a.summary.mean.total_cmp(&b.summary.mean).then(a.label.cmp(&b.label)));
    }
    Ok(VoteShareTable { election: election.into(), party_a: party_a.into(), party_b: party_b.into(), rows })
}

/// A share is an outlier when it falls more than `margin` outside `[p1, p99]`.
pub fn is_outlier(summary: &BoxSummary, share: f64, margin: f64) -> bool {
    share > summary.p99 + margin || share < summary.p1 - margin
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelComparison {
    pub label: usize,
    pub district: usize,
    pub share: f64,
    pub p1: f64,
    pub p99: f64,
    pub outlier: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub outlier_margin: f64,
    pub labels: Vec<LabelComparison>,
    pub outlier_count: usize,
}

/// Match a candidate plan to the barycenter and screen its labeled districts
/// against the ensemble's share distribution.
pub fn compare_plan(
    labeled: &LabeledEnsemble<District>,
    table: &VoteShareTable,
    candidate: &Plan,
    units: &[TerritorialUnit],
    params: &RedistrictParams,
    outlier_margin: f64,
) -> Result<CompareReport> {
    let k = labeled.k();
    let config = plan_to_configuration(candidate, units, &params.sampling)?;
    let space = params.space();
    let c = cost_matrix(&space, labeled.barycenter.points(), config.points(), params.outer.p)?;
    let matching = solve_assignment(&c);
    let districts = candidate.districts(k);
    let mut labels = Vec::with_capacity(k);
    for label in 0..k {
        let district = matching.permutation[label];
        let share = two_way_share(units, &districts[district], &table.election, &table.party_a, &table.party_b)?;
        let row = table
            .row(label)
            .ok_or_else(|| Error::InvalidParameter(format!("table has no row for label {label}")))?;
        labels.push(LabelComparison {
            label,
            district,
            share,
            p1: row.summary.p1,
            p99: row.summary.p99,
            outlier: is_outlier(&row.summary, share, outlier_margin),
        });
    }
    let outlier_count = labels.iter().filter(|l| l.outlier).count();
    Ok(CompareReport { outlier_margin, labels, outlier_count })
}

/// Per-cell count of plans whose `label` district has a unit centroid in
/// that cell. Rows run along y, columns along x, over the centroid bounding
/// box split into `resolution x resolution` cells.
pub fn heatmap_grid(
    labeled: &LabeledEnsemble<District>,
    plans: &[Plan],
    units: &[TerritorialUnit],
    label: usize,
    resolution: usize,
) -> Result<Vec<Vec<u32>>> {
    if units.is_empty() {
        return Err(Error::Empty("no units to rasterize"));
    }
    if resolution == 0 || label >= labeled.k() {
        return Err(Error::InvalidParameter(format!("label {label} at resolution {resolution}")));
    }
    let cells: Vec<(usize, usize)> = {
        let (x0, x1) = units.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), u| (a.min(u.x), b.max(u.x)));
        let (y0, y1) = units.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), u| (a.min(u.y), b.max(u.y)));
        let cell = |v: f64, lo: f64, hi: f64| {
            if hi > lo {
                (((v - lo) / (hi - lo) * resolution as f64) as usize).min(resolution - 1)
            } else {
                0
            }
        };
        units.iter().map(|u| (cell(u.y, y0, y1), cell(u.x, x0, x1))).collect()
    };
    let mut grid = vec![vec![0u32; resolution]; resolution];
    for (e, plan) in plans.iter().enumerate().take(labeled.n()) {
        let district = district_of(labeled, e, label);
        let mut hit = vec![vec![false; resolution]; resolution];
        for (u, &d) in plan.assignment.iter().enumerate() {
            if d == district {
                hit[cells[u].0][cells[u].1] = true;
            }
        }
        for (row, hrow) in grid.iter_mut().zip(&hit) {
            for (g, &h) in row.iter_mut().zip(hrow) {
                *g += h as u32;
            }
        }
    }
    Ok(grid)
}

/// Discrepancy between the labeling seeded from plan 0 and the labeling
/// seeded from plan `j`, for `j = 0..n_seeds` (plan index taken modulo the
/// ensemble size).
pub fn seed_stability(
    plans: &[Plan],
    units: &[TerritorialUnit],
    params: &RedistrictParams,
    n_seeds: usize,
) -> Result<Vec<Discrepancy>> {
    if plans.is_empty() {
        return Err(Error::Empty("ensemble needs at least one plan"));
    }
    let configs = plans_to_configurations(plans, units, &params.sampling)?;
    let runs = (0..n_seeds)
        .into_par_iter()
        .map(|j| {
            let p = RedistrictParams { seed_plan_index: j % plans.len(), ..params.clone() };
            barycenter_of_configurations(&configs, &p).map(|r| r.labeled)
        })
        .collect::<Result<Vec<_>>>()?;
    runs.iter().map(|r| discrepancy(&runs[0], r)).collect()
}

/// Discrepancy between barycenter labelings using the first `t` and first
/// `t + 1` sample points per district, for `t = 1..m_max`. All prefixes come
/// from one `m_max`-point sample.
pub fn sample_size_sensitivity(
    plans: &[Plan],
    units: &[TerritorialUnit],
    m_max: usize,
    params: &RedistrictParams,
) -> Result<Vec<Discrepancy>> {
    if m_max < 2 {
        return Err(Error::InvalidParameter("sample-size sweep needs M_max >= 2".into()));
    }
    let sampling = SamplingConfig { m: m_max, ..params.sampling.clone() };
    let full = plans_to_configurations(plans, units, &sampling)?;
    let runs = (1..=m_max)
        .into_par_iter()
        .map(|t| {
            let configs = full
                .iter()
                .map(|c| c.iter().map(|d| d.prefix(t)).collect::<Result<Vec<_>>>().and_then(Configuration::new))
                .collect::<Result<Vec<_>>>()?;
            let p = RedistrictParams { sampling: SamplingConfig { m: t, ..sampling.clone() }, ..params.clone() };
            barycenter_of_configurations(&configs, &p).map(|r| r.labeled)
        })
        .collect::<Result<Vec<_>>>()?;
    runs.windows(2).map(|w| discrepancy(&w[0], &w[1])).collect()
}

/// Largest relative deviation of district population from the ideal.
pub fn population_deviation(plan: &Plan, units: &[TerritorialUnit], k: usize) -> f64 {
    let total: u64 = units.iter().map(|u| u.population).sum();
    let ideal = total as f64 / k as f64;
    plan.districts(k)
        .iter()
        .map(|d| {
            let pop: u64 = d.iter().map(|&u| units[u].population).sum();
            (pop as f64 - ideal).abs() / ideal
        })
        .fold(0.0, f64::max)
}

/// Whether every district of a plan on a row-major `w x h` grid is
/// 4-connected.
pub fn grid_plan_contiguous(plan: &Plan, w: usize, h: usize, k: usize) -> bool {
    plan.districts(k).iter().all(|d| {
        let Some(&start) = d.first() else { return false };
        let mut seen = vec![false; w * h];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 0;
        while let Some(u) = queue.pop_front() {
            count += 1;
            for v in grid_neighbors(u, w, h) {
                if !seen[v] && plan.assignment[v] == plan.assignment[start] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        count == d.len()
    })
}

fn grid_neighbors(u: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (r, c) = (u / w, u % w);
    [
        (r > 0).then(|| u - w),
        (r + 1 < h).then(|| u + w),
        (c > 0).then(|| u - 1),
        (c + 1 < w).then(|| u + 1),
    ]
    .into_iter()
    .flatten()
}

/// Population tolerance of generated plans.
pub const TOY_BALANCE: f64 = 0.10;
const TOY_ATTEMPTS: usize = 10_000;
/// Election and parties of the synthetic vote data.
pub const TOY_ELECTION: &str = "SYN";
pub const TOY_PARTIES: [&str; 2] = ["A", "B"];

/// Grid units with synthetic attributes and `n_plans` contiguous,
/// population-balanced plans grown from random seed cells.
pub fn toy_plan_generator(
    grid_w: usize,
    grid_h: usize,
    k: usize,
    n_plans: usize,
    rng_seed: u64,
) -> Result<(Vec<TerritorialUnit>, Vec<Plan>)> {
    let n = grid_w * grid_h;
    if k == 0 || k > n || n_plans == 0 {
        return Err(Error::Infeasible(format!("{k} districts on a {grid_w}x{grid_h} grid, {n_plans} plans")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let units: Vec<TerritorialUnit> = (0..n)
        .map(|u| {
            let (r, c) = (u / grid_w, u % grid_w);
            let population: u64 = rng.random_range(50..=150);
            let lean = 0.3 + 0.4 * (c as f64 + 0.5) / grid_w as f64 + rng.random_range(-0.05..0.05);
            let a = (population as f64 * lean).round() as u64;
            let votes = BTreeMap::from([(
                TOY_ELECTION.to_string(),
                BTreeMap::from([(TOY_PARTIES[0].to_string(), a), (TOY_PARTIES[1].to_string(), population - a)]),
            )]);
            TerritorialUnit {
                id: format!("r{r}c{c}"),
                x: c as f64 + 0.5,
                y: r as f64 + 0.5,
                area: rng.random_range(0.5..1.5),
                population,
                votes,
            }
        })
        .collect();
    let mut plans = Vec::with_capacity(n_plans);
    let mut attempts = 0;
    while plans.len() < n_plans {
        if attempts == TOY_ATTEMPTS {
            return Err(Error::Infeasible(format!("no balanced plan after {TOY_ATTEMPTS} attempts")));
        }
        attempts += 1;
        let plan = grow_plan(&units, grid_w, grid_h, k, &mut rng);
        if population_deviation(&plan, &units, k) <= TOY_BALANCE {
            plans.push(plan);
        }
    }
    Ok((units, plans))
}

/// Randomized region growing: the least populous district that can still
/// grow absorbs a random neighboring free cell.
fn grow_plan(units: &[TerritorialUnit], w: usize, h: usize, k: usize, rng: &mut ChaCha8Rng) -> Plan {
    let n = w * h;
    let mut assignment = vec![usize::MAX; n];
    let mut pops = vec![0u64; k];
    let mut cells: Vec<usize> = (0..n).collect();
    cells.shuffle(rng);
    for (d, &u) in cells.iter().take(k).enumerate() {
        assignment[u] = d;
        pops[d] = units[u].population;
    }
    let mut free = n - k;
    while free > 0 {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&d| (pops[d], d));
        for d in order {
            let mut frontier: Vec<usize> = (0..n)
                .filter(|&u| assignment[u] == usize::MAX && grid_neighbors(u, w, h).any(|v| assignment[v] == d))
                .collect();
            if frontier.is_empty() {
                continue;
            }
            frontier.sort_unstable();
            let u = frontier[rng.random_range(0..frontier.len())];
            assignment[u] = d;
            pops[d] += units[u].population;
            free -= 1;
            break;
        }
    }
    Plan { assignment }
}

/// JSON input document for the redistricting commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedistrictInput {
    pub schema_version: u32,
    pub units: Vec<TerritorialUnit>,
    pub plans: Vec<Plan>,
    /// Named plans to screen against the ensemble.
    #[serde(default)]
    pub candidates: BTreeMap<String, Plan>,
}

impl RedistrictInput {
    pub fn new(units: Vec<TerritorialUnit>, plans: Vec<Plan>) -> Self {
        Self { schema_version: SCHEMA_VERSION, units, plans, candidates: BTreeMap::new() }
    }

    /// Check the schema version and every plan; returns the district count.
    pub fn validate(&self) -> Result<usize> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidParameter(format!(
                "schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.units.iter().try_for_each(TerritorialUnit::validate)?;
        let k = self.plans.first().ok_or(Error::Empty("input has no plans"))?.k();
        for p in self.plans.iter().chain(self.candidates.values()) {
            p.validate(self.units.len(), k)?;
        }
        Ok(k)
    }
}
