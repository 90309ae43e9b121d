//! Clustering-consistency harness: synthetic planar datasets, four clustering
//! methods, and the barycenter of repeatedly subsampled and clustered point
//! clouds viewed as unordered k-tuples of uniform measures.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::barycenter::{local_barycenter, BarycenterParams, IterationDiagnostics};
use crate::error::{Error, Result};
use crate::metric::MeasureSpace;
use crate::stats::BoxSummary;
use crate::symprod::{wp_distance, Configuration, UniformAtomicMeasure};

pub type Point2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetTag {
    /// Three isotropic Gaussian blobs.
    Gaussians,
    /// Two concentric noisy circles.
    Circles,
    /// Two interleaved half-moons.
    Moons,
    /// Three anisotropically sheared Gaussian blobs.
    Aniso,
    /// Uniform points in the unit square.
    Square,
    /// Two unit-variance Gaussian blobs ten units apart on the x-axis.
    TwoBlobs,
}

impl std::str::FromStr for DatasetTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gaussians" => Self::Gaussians,
            "circles" => Self::Circles,
            "moons" => Self::Moons,
            "aniso" => Self::Aniso,
            "square" => Self::Square,
            "two-blobs" => Self::TwoBlobs,
            other => return Err(Error::UnknownTag(other.to_string())),
        })
    }
}

/// Radii of the two circles in the `Circles` dataset.
pub const CIRCLE_RADII: [f64; 2] = [1.0, 0.5];
/// Center distance of the `TwoBlobs` dataset.
pub const TWO_BLOB_SEPARATION: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub tag: DatasetTag,
    pub points: Vec<Point2>,
}

fn blobs(rng: &mut ChaCha8Rng, n: usize, centers: &[Point2], std: f64) -> Vec<Point2> {
    let noise = Normal::new(0.0, std).expect("positive std");
    (0..n)
        .map(|i| {
            let c = centers[i % centers.len()];
            [c[0] + noise.sample(rng), c[1] + noise.sample(rng)]
        })
        .collect()
}

/// Deterministic synthetic dataset of `n` planar points.
pub fn generate_dataset(tag: DatasetTag, n: usize, rng_seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidParameter("dataset needs n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let points = match tag {
        DatasetTag::Gaussians => {
            let centers: Vec<Point2> = (0..3)
                .map(|_| [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)])
                .collect();
            blobs(&mut rng, n, &centers, 1.0)
        }
        DatasetTag::Aniso => {
            let centers: Vec<Point2> = (0..3)
                .map(|_| [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)])
                .collect();
            blobs(&mut rng, n, &centers, 1.0)
                .into_iter()
                .map(|[x, y]| [0.6 * x - 0.4 * y, -0.6 * x + 0.8 * y])
                .collect()
        }
        DatasetTag::Circles => {
            let noise = Normal::new(0.0, 0.05).expect("positive std");
            (0..n)
                .map(|i| {
                    let r = CIRCLE_RADII[i % 2];
                    let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    [r * t.cos() + noise.sample(&mut rng), r * t.sin() + noise.sample(&mut rng)]
                })
                .collect()
        }
        DatasetTag::Moons => {
            let noise = Normal::new(0.0, 0.05).expect("positive std");
            (0..n)
                .map(|i| {
                    let t: f64 = rng.random_range(0.0..std::f64::consts::PI);
                    let (x, y) = if i % 2 == 0 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
                    [x + noise.sample(&mut rng), y + noise.sample(&mut rng)]
                })
                .collect()
        }
        DatasetTag::Square => (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect(),
        DatasetTag::TwoBlobs => blobs(&mut rng, n, &[[0.0, 0.0], [TWO_BLOB_SEPARATION, 0.0]], 1.0),
    };
    Ok(PointCloud { tag, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterMethod {
    KMeans,
    Spectral,
    Ward,
    SingleLinkage,
}

impl std::str::FromStr for ClusterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "kmeans" | "k-means" => Self::KMeans,
            "spectral" => Self::Spectral,
            "ward" => Self::Ward,
            "single" | "single-linkage" => Self::SingleLinkage,
            other => return Err(Error::InvalidParameter(format!("unknown clustering method `{other}`"))),
        })
    }
}

/// Neighbors per point in the spectral-clustering graph.
pub const SPECTRAL_NEIGHBORS: usize = 10;

#[inline]
fn sq_dist(a: &Point2, b: &Point2) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Cluster labels in `0..k` for every point; every label is used.
pub fn cluster_labels(points: &[Point2], method: ClusterMethod, k: usize, rng_seed: u64) -> Result<Vec<usize>> {
    if k == 0 || points.len() < k {
        return Err(Error::Infeasible(format!("cannot split {} points into {k} clusters", points.len())));
    }
    let mut labels = match method {
        ClusterMethod::KMeans => kmeans(points, k, rng_seed, 300).labels,
        ClusterMethod::Ward => ward(points, k),
        ClusterMethod::SingleLinkage => single_linkage(points, k),
        ClusterMethod::Spectral => spectral(points, k, rng_seed),
    };
    repair_empty(points, &mut labels, k);
    Ok(labels)
}

/// Cluster and package each cluster as a uniform measure.
pub fn cluster(
    points: &[Point2],
    method: ClusterMethod,
    k: usize,
    rng_seed: u64,
) -> Result<Configuration<UniformAtomicMeasure<Vec<f64>>>> {
    let labels = cluster_labels(points, method, k, rng_seed)?;
    partition_to_configuration(points, &labels, k)
}

pub fn partition_to_configuration(
    points: &[Point2],
    labels: &[usize],
    k: usize,
) -> Result<Configuration<UniformAtomicMeasure<Vec<f64>>>> {
    let mut groups: Vec<Vec<Vec<f64>>> = vec![Vec::new(); k];
    for (pt, &l) in points.iter().zip(labels) {
        groups[l].push(pt.to_vec());
    }
    let measures = groups.into_iter().map(UniformAtomicMeasure::new).collect::<Result<Vec<_>>>()?;
    Configuration::new(measures)
}

/// Move the farthest-from-centroid point of the largest cluster into each
/// empty cluster.
fn repair_empty(points: &[Point2], labels: &mut [usize], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let largest = (0..k).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).expect("k >= 1");
        let members: Vec<usize> = (0..points.len()).filter(|&i| labels[i] == largest).collect();
        let n = members.len() as f64;
        let cx = members.iter().map(|&i| points[i][0]).sum::<f64>() / n;
        let cy = members.iter().map(|&i| points[i][1]).sum::<f64>() / n;
        let far = members
            .iter()
            .copied()
            .max_by(|&a, &b| sq_dist(&points[a], &[cx, cy]).total_cmp(&sq_dist(&points[b], &[cx, cy])))
            .expect("largest cluster is nonempty");
        labels[far] = empty;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<Point2>,
    /// Within-cluster sum of squares after every Lloyd step.
    pub objective_trace: Vec<f64>,
}

fn kmeans_objective(points: &[Point2], labels: &[usize], centroids: &[Point2]) -> f64 {
    points.iter().zip(labels).map(|(p, &l)| sq_dist(p, &centroids[l])).sum()
}

/// Lloyd iterations from a k-means++ initialization.
pub fn kmeans(points: &[Point2], k: usize, rng_seed: u64, max_iters: usize) -> KMeansResult {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let n = points.len();
    let mut centroids: Vec<Point2> = vec![points[rng.random_range(0..n)]];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[next]);
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[next]));
        }
    }
    let assign = |centroids: &[Point2]| -> Vec<usize> {
        points
            .iter()
            .map(|p| {
                (0..k)
                    .min_by(|&a, &b| sq_dist(p, &centroids[a]).total_cmp(&sq_dist(p, &centroids[b])))
                    .expect("k >= 1")
            })
            .collect()
    };
    let mut labels = assign(&centroids);
    let mut trace = vec![kmeans_objective(points, &labels, &centroids)];
    for _ in 0..max_iters {
        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            sums[l][0] += p[0];
            sums[l][1] += p[1];
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            }
        }
        let next = assign(&centroids);
        trace.push(kmeans_objective(points, &next, &centroids));
        if next == labels {
            break;
        }
        labels = next;
    }
    KMeansResult { labels, centroids, objective_trace: trace }
}

/// Union-find labels from a list of merges, renumbered by first appearance.
fn labels_from_roots(roots: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    roots
        .iter()
        .map(|r| {
            let next = map.len();
            *map.entry(*r).or_insert(next)
        })
        .collect()
}

/// Single linkage: cut the `k - 1` heaviest edges of a minimum spanning tree.
pub fn single_linkage(points: &[Point2], k: usize) -> Vec<usize> {
    let n = points.len();
    // Prim on the complete graph.
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n.saturating_sub(1));
    best[0] = 0.0;
    for _ in 0..n {
        let u = (0..n)
            .filter(|&i| !in_tree[i])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]).then(a.cmp(&b)))
            .expect("vertex left");
        in_tree[u] = true;
        if parent[u] != usize::MAX {
            edges.push((best[u], parent[u].min(u), parent[u].max(u)));
        }
        for v in 0..n {
            if !in_tree[v] {
                let d = sq_dist(&points[u], &points[v]);
                if d < best[v] {
                    best[v] = d;
                    parent[v] = u;
                }
            }
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let keep = n - k;
    let mut uf: Vec<usize> = (0..n).collect();
    fn find(uf: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while uf[r] != r {
            r = uf[r];
        }
        let mut c = x;
        while uf[c] != r {
            let next = uf[c];
            uf[c] = r;
            c = next;
        }
        r
    }
    for &(_, a, b) in edges.iter().take(keep) {
        let (ra, rb) = (find(&mut uf, a), find(&mut uf, b));
        if ra != rb {
            uf[ra.max(rb)] = ra.min(rb);
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut uf, i)).collect();
    labels_from_roots(&roots)
}

/// Ward agglomerative clustering via Lance–Williams updates on squared
/// Euclidean distances.
pub fn ward(points: &[Point2], k: usize) -> Vec<usize> {
    let n = points.len();
    let mut d = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..i {
            let v = sq_dist(&points[i], &points[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    let mut size = vec![1usize; n];
    let mut active: Vec<bool> = vec![true; n];
    let mut owner: Vec<usize> = (0..n).collect();
    let mut clusters = n;
    while clusters > k {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if active[j] && d[i][j] < best.0 {
                    best = (d[i][j], i, j);
                }
            }
        }
        let (dij, a, b) = best;
        for c in 0..n {
            if !active[c] || c == a || c == b {
                continue;
            }
            let (na, nb, nc) = (size[a] as f64, size[b] as f64, size[c] as f64);
            let v = ((na + nc) * d[a][c] + (nb + nc) * d[b][c] - nc * dij) / (na + nb + nc);
            d[a][c] = v;
            d[c][a] = v;
        }
        size[a] += size[b];
        active[b] = false;
        owner.iter_mut().for_each(|o| {
            if *o == b {
                *o = a;
            }
        });
        clusters -= 1;
    }
    labels_from_roots(&owner)
}

/// Spectral clustering: symmetrized k-nearest-neighbor graph, top
/// eigenvectors of the normalized adjacency by subspace iteration, row
/// normalization, then k-means on the embedding.
pub fn spectral(points: &[Point2], k: usize, rng_seed: u64) -> Vec<usize> {
    let n = points.len();
    let nn = SPECTRAL_NEIGHBORS.min(n.saturating_sub(1));
    let mut adj = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| sq_dist(&points[i], &points[a]).total_cmp(&sq_dist(&points[i], &points[b])).then(a.cmp(&b)));
        for &j in order.iter().take(nn) {
            adj[i][j] = 1.0;
            adj[j][i] = 1.0;
        }
    }
    let deg: Vec<f64> = adj.iter().map(|r| r.iter().sum::<f64>().max(1e-12)).collect();
    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    // Shifted operator (I + D^-1/2 A D^-1/2) / 2 has spectrum in [0, 1].
    let apply = |v: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let s: f64 = adj[i].iter().enumerate().filter(|(_, &a)| a > 0.0).map(|(j, _)| inv_sqrt[j] * v[j]).sum();
                0.5 * (v[i] + inv_sqrt[i] * s)
            })
            .collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ 0x5eed);
    let mut basis: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
    orthonormalize(&mut basis);
    for _ in 0..300 {
        basis = basis.iter().map(|v| apply(v)).collect();
        orthonormalize(&mut basis);
    }
    let embedded: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = basis.iter().map(|v| v[i]).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            row.iter().map(|x| x / norm).collect()
        })
        .collect();
    kmeans_nd(&embedded, k, rng_seed)
}

fn orthonormalize(basis: &mut [Vec<f64>]) {
    for i in 0..basis.len() {
        for j in 0..i {
            let dot: f64 = basis[i].iter().zip(&basis[j]).map(|(a, b)| a * b).sum();
            let (head, tail) = basis.split_at_mut(i);
            tail[0].iter_mut().zip(&head[j]).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = basis[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            basis[i].iter_mut().for_each(|x| *x /= norm);
        }
    }
}

/// Plain Lloyd iterations in arbitrary dimension, farthest-point init.
fn kmeans_nd(points: &[Vec<f64>], k: usize, rng_seed: u64) -> Vec<usize> {
    let n = points.len();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let far = (0..n)
            .max_by(|&a, &b| {
                let da = centers.iter().map(|c| dist(&points[a], c)).fold(f64::INFINITY, f64::min);
                let db = centers.iter().map(|c| dist(&points[b], c)).fold(f64::INFINITY, f64::min);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("n >= k");
        centers.push(points[far].clone());
    }
    let mut labels = vec![usize::MAX; n];
    for _ in 0..300 {
        let next: Vec<usize> = points
            .iter()
            .map(|p| (0..k).min_by(|&a, &b| dist(p, &centers[a]).total_cmp(&dist(p, &centers[b]))).expect("k >= 1"))
            .collect();
        if next == labels {
            break;
        }
        labels = next;
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
            if !members.is_empty() {
                for d in 0..center.len() {
                    center[d] = members.iter().map(|m| m[d]).sum::<f64>() / members.len() as f64;
                }
            }
        }
    }
    labels
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyConfig {
    pub method: ClusterMethod,
    pub k: usize,
    pub n_subsamples: usize,
    pub subsample_size: usize,
    pub m_atoms: usize,
    pub rng_seed: u64,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self { method: ClusterMethod::KMeans, k: 2, n_subsamples: 10, subsample_size: 200, m_atoms: 50, rng_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub config: ConsistencyConfig,
    /// `W_2(B, P_i)` for every clustered subsample.
    pub distances: Vec<f64>,
    pub summary: BoxSummary,
    /// Indices into the full cloud of each subsample, ascending.
    pub subsamples: Vec<Vec<usize>>,
    /// Atoms of each barycenter component.
    pub barycenter: Vec<Vec<Vec<f64>>>,
    pub diagnostics: IterationDiagnostics,
}

/// `m` points drawn from `cluster`: without replacement when it has at least
/// `m` points, otherwise all of it topped up with draws with replacement.
fn resample_cluster(rng: &mut ChaCha8Rng, cluster: &[Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    if cluster.len() >= m {
        let mut idx = sample(rng, cluster.len(), m).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| cluster[i].clone()).collect()
    } else {
        let mut out = cluster.to_vec();
        while out.len() < m {
            out.push(cluster[rng.random_range(0..cluster.len())].clone());
        }
        out
    }
}

/// Subsample, cluster, and measure how far each partitioned subsample lies
/// from the barycenter of all of them.
pub fn consistency_experiment(
    cloud: &PointCloud,
    config: &ConsistencyConfig,
    params: &BarycenterParams,
) -> Result<ConsistencyReport> {
    let c = config;
    if c.n_subsamples == 0 || c.m_atoms == 0 {
        return Err(Error::InvalidParameter("need at least one subsample and one atom".into()));
    }
    if c.subsample_size > cloud.points.len() || c.subsample_size < c.k {
        return Err(Error::Infeasible(format!(
            "subsample of {} from {} points into {} clusters",
            c.subsample_size,
            cloud.points.len(),
            c.k
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.rng_seed);
    let mut partitions = Vec::with_capacity(c.n_subsamples);
    let mut subsamples = Vec::with_capacity(c.n_subsamples);
    for s in 0..c.n_subsamples {
        let mut idx = sample(&mut rng, cloud.points.len(), c.subsample_size).into_vec();
        idx.sort_unstable();
        let sub: Vec<Point2> = idx.iter().map(|&i| cloud.points[i]).collect();
        partitions.push(cluster(&sub, c.method, c.k, c.rng_seed.wrapping_add(1 + s as u64))?);
        subsamples.push(idx);
    }
    let seed_measures = partitions[0]
        .iter()
        .map(|m| UniformAtomicMeasure::new(resample_cluster(&mut rng, m.atoms(), c.m_atoms)))
        .collect::<Result<Vec<_>>>()?;
    let seed = Configuration::new(seed_measures)?;
    let space = MeasureSpace { atoms: c.m_atoms };
    let result = local_barycenter(&space, &partitions, &seed, params)?;
    let distances = partitions
        .iter()
        .map(|part| wp_distance(&space, &result.barycenter, part, 2.0).map(|(d, _)| d))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConsistencyReport {
        config: c.clone(),
        summary: BoxSummary::of(&distances),
        distances,
        subsamples,
        barycenter: result.barycenter.iter().map(|m| m.atoms().to_vec()).collect(),
        diagnostics: result.diagnostics,
    })
}
