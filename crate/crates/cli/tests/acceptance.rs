//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symprod_core::assignment::{default_cost_tol, solve_assignment, CostMatrix};
use symprod_core::barycenter::{local_barycenter, verify_stationary, BarycenterParams, Mode};
use symprod_core::clustering::{
    consistency_experiment, generate_dataset, ClusterMethod, ConsistencyConfig, DatasetTag, TWO_BLOB_SEPARATION,
};
use symprod_core::labeling::{discrepancy_of_groups, LabelMember};
use symprod_core::redistrict::{
    compare_plan, ensemble_barycenter, seed_stability, toy_plan_generator, vote_share_table, RedistrictParams,
    DEFAULT_OUTLIER_MARGIN, TOY_ELECTION, TOY_PARTIES,
};
use symprod_core::stats::median;
use symprod_core::symprod::{diag_embed, matched_geodesic, to_measure, uniform_discrete_ot, wp_distance};
use symprod_core::{Angle, Circle, Configuration, Euclidean, GroundSpace, NestedSpace};

const ASSIGNMENT_MATRICES: usize = 600;
const ASSIGNMENT_MAX_K: usize = 7;
const ASSIGNMENT_BUDGET: Duration = Duration::from_secs(10);
const AXIOM_TRIPLES: usize = 1000;
const TRIANGLE_TOL: f64 = 1e-10;
const ISOMETRY_TOL: f64 = 1e-12;
const OT_PAIRS: usize = 200;
const OT_TOL: f64 = 1e-9;
const CURVATURE_TRIPLES: usize = 1000;
const CURVATURE_TOL: f64 = 1e-9;
const ORDER_STAT_ENSEMBLES: usize = 100;
const ORDER_STAT_TOL: f64 = 1e-10;
const STATIONARITY_RUNS: usize = 100;
const STATIONARITY_TOL: f64 = 1e-7;
const TERMINATION_TRIALS: usize = 100;
const CIRCLE_PAIRS: usize = 10;
const CIRCLE_SEEDS: u64 = 20;
const CIRCLE_DISTINCT_GAP: f64 = 1e-6;
const CLUSTER_SPREAD_FRACTION: f64 = 0.2;
/// Seed of both clustering runs. The planted outlier must fall into some but
/// not all subsamples for the comparison to be informative.
const CLUSTER_SEED: u64 = 1;
/// Spread (p99 - p1) of the k-means two-blob run, recorded at build time.
const CLUSTER_KMEANS_SPREAD: f64 = 0.05299999454383819;
const CLUSTER_REGRESSION_TOL: f64 = 1e-6;
const PIPELINE_BUDGET: Duration = Duration::from_secs(300);
const REDISTRICT_MEDIAN_MAX: f64 = 0.05;
const DISCREPANCY_TRIALS: usize = 100;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn plane_config(r: &mut ChaCha8Rng, k: usize, half: f64) -> Configuration<Vec<f64>> {
    Configuration::new((0..k).map(|_| vec![r.random_range(-half..half), r.random_range(-half..half)]).collect())
        .unwrap()
}

fn circle_config(r: &mut ChaCha8Rng, k: usize) -> Configuration<Angle> {
    Configuration::new((0..k).map(|_| Angle::new(r.random_range(-4.0..4.0))).collect()).unwrap()
}

/// Every permutation of `0..k` (Heap's algorithm).
fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn heap(n: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..n - 1 {
            heap(n - 1, a, out);
            if n.is_multiple_of(2) {
                a.swap(i, n - 1);
            } else {
                a.swap(0, n - 1);
            }
        }
        heap(n - 1, a, out);
    }
    let mut out = Vec::new();
    heap(k, &mut (0..k).collect(), &mut out);
    out
}

fn c1_assignment() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let perms: Vec<Vec<Vec<usize>>> = (0..=ASSIGNMENT_MAX_K).map(permutations).collect();
    let mut failures = 0;
    for t in 0..ASSIGNMENT_MATRICES {
        let k = 1 + t % ASSIGNMENT_MAX_K;
        // Alternate continuous entries with small integers, which tie often.
        let c = CostMatrix::from_fn(k, |_, _| {
            if t % 2 == 0 {
                r.random_range(0.0..10.0)
            } else {
                r.random_range(0..4) as f64
            }
        })
        .unwrap();
        let m = solve_assignment(&c);
        let best = perms[k].iter().map(|p| c.cost_of(p)).fold(f64::INFINITY, f64::min);
        let tol = default_cost_tol(best);
        let lex_first = perms[k].iter().filter(|p| c.cost_of(p) <= best + tol).min().unwrap();
        if (m.cost - best).abs() > tol || m.cost != c.cost_of(&m.permutation) || &m.permutation != lex_first {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        failures == 0 && elapsed < ASSIGNMENT_BUDGET,
        format!("{ASSIGNMENT_MATRICES} matrices, k <= {ASSIGNMENT_MAX_K}, {failures} failures, {elapsed:.1?}"),
    )
}

fn axioms<G: GroundSpace>(space: &G, triples: &[[Configuration<G::Point>; 3]]) -> (usize, usize, f64) {
    let (mut asym, mut tri) = (0, 0);
    let mut worst = 0.0f64;
    for [a, b, c] in triples {
        let ab = wp_distance(space, a, b, 2.0).unwrap().0;
        let ba = wp_distance(space, b, a, 2.0).unwrap().0;
        let bc = wp_distance(space, b, c, 2.0).unwrap().0;
        let ac = wp_distance(space, a, c, 2.0).unwrap().0;
        if ab != ba {
            asym += 1;
        }
        let excess = ac - ab - bc;
        worst = worst.max(excess);
        if excess > TRIANGLE_TOL {
            tri += 1;
        }
    }
    (asym, tri, worst)
}

fn c2_metric_axioms() -> Outcome {
    let mut r = rng(2);
    let plane: Vec<_> = (0..AXIOM_TRIPLES)
        .map(|t| {
            let k = 2 + t % 5;
            [plane_config(&mut r, k, 10.0), plane_config(&mut r, k, 10.0), plane_config(&mut r, k, 10.0)]
        })
        .collect();
    let circle: Vec<_> = (0..AXIOM_TRIPLES)
        .map(|t| {
            let k = 2 + t % 5;
            [circle_config(&mut r, k), circle_config(&mut r, k), circle_config(&mut r, k)]
        })
        .collect();
    let (pa, pt, pw) = axioms(&Euclidean::new(2), &plane);
    let (ca, ct, cw) = axioms(&Circle, &circle);
    check(
        pa + pt + ca + ct == 0,
        format!(
            "{AXIOM_TRIPLES} triples each; SP^k R^2: {pa} asymmetric, {pt} triangle violations (max excess {pw:.1e}); \
             SP^k S^1: {ca} asymmetric, {ct} triangle violations (max excess {cw:.1e})"
        ),
    )
}

fn c3_isometries() -> Outcome {
    let mut r = rng(3);
    let mut worst_diag = 0.0f64;
    for t in 0..1000 {
        let k = 1 + t % 6;
        let (x, y) = (plane_config(&mut r, 1, 10.0)[0].clone(), plane_config(&mut r, 1, 10.0)[0].clone());
        let d = Euclidean::new(2).distance(&x, &y);
        let e = wp_distance(&Euclidean::new(2), &diag_embed(&x, k).unwrap(), &diag_embed(&y, k).unwrap(), 2.0).unwrap().0;
        worst_diag = worst_diag.max((d - e).abs());
        let (a, b) = (Angle::new(r.random_range(-4.0..4.0)), Angle::new(r.random_range(-4.0..4.0)));
        let d = Circle.distance(&a, &b);
        let e = wp_distance(&Circle, &diag_embed(&a, k).unwrap(), &diag_embed(&b, k).unwrap(), 2.0).unwrap().0;
        worst_diag = worst_diag.max((d - e).abs());
    }
    let mut worst_ot = 0.0f64;
    for t in 0..OT_PAIRS {
        let k = 1 + t % 6;
        let (a, b) = (plane_config(&mut r, k, 10.0), plane_config(&mut r, k, 10.0));
        let d = wp_distance(&Euclidean::new(2), &a, &b, 2.0).unwrap().0;
        let ot = uniform_discrete_ot(&Euclidean::new(2), &to_measure(&a), &to_measure(&b), 2.0).unwrap();
        worst_ot = worst_ot.max((d - ot.distance).abs());
    }
    check(
        worst_diag <= ISOMETRY_TOL && worst_ot <= OT_TOL,
        format!("diagonal embedding max error {worst_diag:.1e} (1000 pairs); transport vs assignment max error {worst_ot:.1e} ({OT_PAIRS} pairs)"),
    )
}

fn c4_curvature() -> Outcome {
    let mut r = rng(4);
    let space = Euclidean::new(2);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..CURVATURE_TRIPLES {
        let (x, y, z) = (plane_config(&mut r, 3, 10.0), plane_config(&mut r, 3, 10.0), plane_config(&mut r, 3, 10.0));
        let dxy = wp_distance(&space, &x, &y, 2.0).unwrap().0;
        let dzx = wp_distance(&space, &z, &x, 2.0).unwrap().0;
        let dzy = wp_distance(&space, &z, &y, 2.0).unwrap().0;
        for i in 1..=9 {
            let t = i as f64 / 10.0;
            let g = matched_geodesic(&space, &x, &y, t, 2.0).unwrap();
            let dzg = wp_distance(&space, &z, &g, 2.0).unwrap().0;
            let deficit = (1.0 - t) * dzx * dzx + t * dzy * dzy - t * (1.0 - t) * dxy * dxy - dzg * dzg;
            worst = worst.max(deficit);
            if deficit > CURVATURE_TOL {
                violations += 1;
            }
        }
    }
    check(
        violations == 0,
        format!("{CURVATURE_TRIPLES} triples x 9 times in SP^3 R^2, {violations} violations (max deficit {worst:.1e})"),
    )
}

fn c5_order_statistics() -> Outcome {
    let mut r = rng(5);
    let params = BarycenterParams { mode: Mode::Exhaustive, ..BarycenterParams::default() };
    let mut failures = 0;
    let mut worst = 0.0f64;
    for _ in 0..ORDER_STAT_ENSEMBLES {
        let k = r.random_range(1..=6);
        let n = r.random_range(1..=20);
        let ens: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| r.random_range(-10.0..10.0)).collect()).collect();
        let configs: Vec<Configuration<Vec<f64>>> =
            ens.iter().map(|e| Configuration::new(e.iter().map(|&v| vec![v]).collect()).unwrap()).collect();
        let seed = Configuration::new((0..k).map(|_| vec![r.random_range(-10.0..10.0)]).collect()).unwrap();
        let res = local_barycenter(&Euclidean::new(1), &configs, &seed, &params).unwrap();
        let mut got: Vec<f64> = res.barycenter.iter().map(|p| p[0]).collect();
        got.sort_by(f64::total_cmp);
        let expected: Vec<f64> = (0..k)
            .map(|i| {
                ens.iter()
                    .map(|e| {
                        let mut s = e.clone();
                        s.sort_by(f64::total_cmp);
                        s[i]
                    })
                    .sum::<f64>()
                    / n as f64
            })
            .collect();
        let err = got.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(err);
        if err > ORDER_STAT_TOL || !res.diagnostics.converged {
            failures += 1;
        }
    }
    check(
        failures == 0,
        format!("{ORDER_STAT_ENSEMBLES} ensembles, {failures} failures, max error {worst:.1e}"),
    )
}

fn c6_stationarity() -> Outcome {
    let mut r = rng(6);
    let params = BarycenterParams { mode: Mode::Exhaustive, ..BarycenterParams::default() };
    let (mut not_stationary, mut bad_trace) = (0, 0);
    for _ in 0..STATIONARITY_RUNS {
        let k = r.random_range(1..=4);
        let n = r.random_range(1..=8);
        let ens: Vec<_> = (0..n).map(|_| plane_config(&mut r, k, 5.0)).collect();
        let seed = plane_config(&mut r, k, 5.0);
        let res = local_barycenter(&Euclidean::new(2), &ens, &seed, &params).unwrap();
        let rep = verify_stationary(&Euclidean::new(2), &ens, &res.barycenter, &params, STATIONARITY_TOL).unwrap();
        not_stationary += usize::from(!rep.stationary);
        bad_trace += usize::from(!res.diagnostics.strictly_decreasing_except_last());

        let ens: Vec<_> = (0..n).map(|_| circle_config(&mut r, k)).collect();
        let seed = circle_config(&mut r, k);
        let res = local_barycenter(&Circle, &ens, &seed, &params).unwrap();
        let rep = verify_stationary(&Circle, &ens, &res.barycenter, &params, STATIONARITY_TOL).unwrap();
        not_stationary += usize::from(!rep.stationary);
        bad_trace += usize::from(!res.diagnostics.strictly_decreasing_except_last());
    }
    check(
        not_stationary + bad_trace == 0,
        format!(
            "{} exhaustive runs (Euclidean and circle), {not_stationary} non-stationary, {bad_trace} non-decreasing traces",
            2 * STATIONARITY_RUNS
        ),
    )
}

fn c7_termination() -> Outcome {
    let mut r = rng(7);
    let params = BarycenterParams::default();
    let mut euclid_ok = 0;
    for _ in 0..TERMINATION_TRIALS {
        let k = r.random_range(1..=6);
        let n = r.random_range(1..=20);
        let ens: Vec<_> = (0..n).map(|_| plane_config(&mut r, k, 10.0)).collect();
        let seed = ens[r.random_range(0..n)].clone();
        let res = local_barycenter(&Euclidean::new(2), &ens, &seed, &params).unwrap();
        euclid_ok += usize::from(res.diagnostics.converged);
    }
    let mut nested_ok = 0;
    for _ in 0..TERMINATION_TRIALS {
        let k = r.random_range(1..=6);
        let m = r.random_range(1..=10);
        let n = r.random_range(1..=20);
        let space = NestedSpace::new(Euclidean::new(2), m, BarycenterParams::inner_default());
        let ens: Vec<Configuration<Configuration<Vec<f64>>>> = (0..n)
            .map(|_| Configuration::new((0..k).map(|_| plane_config(&mut r, m, 10.0)).collect()).unwrap())
            .collect();
        let seed = ens[r.random_range(0..n)].clone();
        let res = local_barycenter(&space, &ens, &seed, &params).unwrap();
        nested_ok += usize::from(res.diagnostics.converged);
    }
    check(
        euclid_ok == TERMINATION_TRIALS && nested_ok == TERMINATION_TRIALS,
        format!("converged: Euclidean {euclid_ok}/{TERMINATION_TRIALS}, nested {nested_ok}/{TERMINATION_TRIALS}"),
    )
}

fn c8_circle_seeds() -> Outcome {
    let mut r = rng(8);
    let ens: Vec<_> = (0..CIRCLE_PAIRS).map(|_| circle_config(&mut r, 2)).collect();
    let params = BarycenterParams { mode: Mode::Exhaustive, ..BarycenterParams::default() };
    let mut outputs: Vec<Configuration<Angle>> = Vec::new();
    let mut not_stationary = 0;
    for seed in 0..CIRCLE_SEEDS {
        let start = circle_config(&mut rng(1000 + seed), 2);
        let res = local_barycenter(&Circle, &ens, &start, &params).unwrap();
        let rep = verify_stationary(&Circle, &ens, &res.barycenter, &params, STATIONARITY_TOL).unwrap();
        not_stationary += usize::from(!rep.stationary);
        outputs.push(res.barycenter);
    }
    let mut distinct: Vec<&Configuration<Angle>> = Vec::new();
    for o in &outputs {
        if distinct.iter().all(|d| wp_distance(&Circle, d, o, 2.0).unwrap().0 > CIRCLE_DISTINCT_GAP) {
            distinct.push(o);
        }
    }
    check(
        distinct.len() >= 2 && not_stationary == 0,
        format!(
            "{CIRCLE_SEEDS} seeds on {CIRCLE_PAIRS} pairs in SP^2 S^1: {} distinct outputs, {not_stationary} non-stationary",
            distinct.len()
        ),
    )
}

fn c9_clustering() -> Outcome {
    let start = Instant::now();
    let mut cloud = generate_dataset(DatasetTag::TwoBlobs, 1000, 1).unwrap();
    let params = BarycenterParams::default();
    let config = ConsistencyConfig { rng_seed: CLUSTER_SEED, ..ConsistencyConfig::default() };
    let kmeans = consistency_experiment(&cloud, &config, &params).unwrap();
    let outlier = cloud.points.len();
    cloud.points.push([TWO_BLOB_SEPARATION / 2.0, 40.0]);
    let single = consistency_experiment(&cloud, &ConsistencyConfig { method: ClusterMethod::SingleLinkage, ..config }, &params)
        .unwrap();
    let elapsed = start.elapsed();
    let hits = single.subsamples.iter().filter(|s| s.contains(&outlier)).count();
    let (ks, ss) = (kmeans.summary.spread(), single.summary.spread());
    check(
        ks < CLUSTER_SPREAD_FRACTION * TWO_BLOB_SEPARATION
            && (1..single.subsamples.len()).contains(&hits)
            && ss > ks
            && (ks - CLUSTER_KMEANS_SPREAD).abs() <= CLUSTER_REGRESSION_TOL
            && kmeans.distances.iter().chain(&single.distances).all(|&d| d >= 0.0)
            && elapsed < PIPELINE_BUDGET,
        format!(
            "k-means spread {ks:.4} (limit {:.1}, recorded {CLUSTER_KMEANS_SPREAD:.4}); single linkage with outlier \
             {ss:.4} (outlier in {hits} of {} subsamples); {elapsed:.1?}",
            CLUSTER_SPREAD_FRACTION * TWO_BLOB_SEPARATION,
            single.subsamples.len()
        ),
    )
}

fn c10_redistricting() -> Outcome {
    let start = Instant::now();
    let (units, plans) = toy_plan_generator(6, 6, 3, 50, 2024).unwrap();
    let params = RedistrictParams::new(3);
    let run = ensemble_barycenter(&plans, &units, &params).unwrap();
    let converged = run.result.diagnostics.converged;

    // Relabel every plan's districts and map the labels back.
    let mut r = rng(10);
    let perms: Vec<Vec<usize>> = plans
        .iter()
        .map(|_| {
            let mut p = vec![0, 1, 2];
            p.shuffle(&mut r);
            p
        })
        .collect();
    let relabeled: Vec<_> = plans.iter().zip(&perms).map(|(p, s)| p.relabeled(s)).collect();
    let rerun = ensemble_barycenter(&relabeled, &units, &params).unwrap();
    let mapped: Vec<Vec<LabelMember>> = rerun
        .labeled
        .label_groups()
        .into_iter()
        .map(|g| {
            g.into_iter()
                .map(|m| LabelMember {
                    element: m.element,
                    position: perms[m.element].iter().position(|&d| d == m.position).unwrap(),
                })
                .collect()
        })
        .collect();
    let invariance = discrepancy_of_groups(&run.labeled.label_groups(), &mapped).unwrap().raw;

    let stability = seed_stability(&plans, &units, &params, 10).unwrap();
    let normalized: Vec<f64> = stability.iter().map(|d| d.normalized).collect();
    let med = median(&normalized);

    let table =
        vote_share_table(&run.labeled, &plans, &units, TOY_ELECTION, TOY_PARTIES[0], TOY_PARTIES[1], false).unwrap();
    let member = 7;
    let report = compare_plan(&run.labeled, &table, &plans[member], &units, &params, DEFAULT_OUTLIER_MARGIN).unwrap();
    let elapsed = start.elapsed();
    check(
        converged && invariance == 0.0 && med <= REDISTRICT_MEDIAN_MAX && report.outlier_count == 0 && elapsed < PIPELINE_BUDGET,
        format!(
            "converged {converged} in {} iterations; relabeling discrepancy {invariance}; seed discrepancies {normalized:.3?} \
             (median {med:.3}); ensemble member outliers {}; {elapsed:.1?}",
            run.result.diagnostics.iterations, report.outlier_count
        ),
    )
}

fn random_groups(r: &mut ChaCha8Rng, k: usize, n: usize) -> Vec<Vec<LabelMember>> {
    let mut groups = vec![Vec::new(); k];
    for element in 0..n {
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(r);
        for (label, position) in order.into_iter().enumerate() {
            groups[label].push(LabelMember { element, position });
        }
    }
    groups
}

fn c11_discrepancy() -> Outcome {
    let mut r = rng(11);
    let mut failures = 0;
    for _ in 0..DISCREPANCY_TRIALS {
        let k = r.random_range(1..=6);
        let n = r.random_range(1..=15);
        let a = random_groups(&mut r, k, n);
        let b = random_groups(&mut r, k, n);
        let mut shuffled = a.clone();
        shuffled.shuffle(&mut r);
        let mut b_shuffled = b.clone();
        b_shuffled.shuffle(&mut r);
        let self_d = discrepancy_of_groups(&a, &a).unwrap().raw;
        let perm_d = discrepancy_of_groups(&a, &shuffled).unwrap().raw;
        let ab = discrepancy_of_groups(&a, &b).unwrap().raw;
        let ab_shuffled = discrepancy_of_groups(&a, &b_shuffled).unwrap().raw;
        if self_d != 0.0 || perm_d != 0.0 || (ab - ab_shuffled).abs() > 1e-12 || !(0.0..=k as f64).contains(&ab) {
            failures += 1;
        }
    }
    // Two elements, two labels; each label keeps one of its two coordinates.
    let m = |element, position| LabelMember { element, position };
    let a = vec![vec![m(0, 0), m(1, 0)], vec![m(0, 1), m(1, 1)]];
    let b = vec![vec![m(0, 0), m(1, 1)], vec![m(0, 1), m(1, 0)]];
    let hand = discrepancy_of_groups(&a, &b).unwrap();
    check(
        failures == 0 && hand.raw == 1.0 && hand.normalized == 0.5,
        format!(
            "{DISCREPANCY_TRIALS} randomized labelings, {failures} failures; hand example raw {} normalized {}",
            hand.raw, hand.normalized
        ),
    )
}

fn c12_cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_symprod");
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let run = |args: &[&str]| -> Vec<u8> {
        let out = Command::new(bin).args(args).output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let toy = dir.path().join("toy.json");
    let mut doc: serde_json::Value =
        serde_json::from_slice(&run(&["toy-ensemble", "--width", "4", "--height", "4", "--k", "2", "--plans", "10", "--seed", "9"]))
            .unwrap();
    doc["candidates"] = serde_json::json!({ "member": doc["plans"][4].clone() });
    std::fs::write(&toy, serde_json::to_vec(&doc).unwrap()).unwrap();
    let toy = toy.to_str().unwrap();
    let line = data.join("distance_line.json");
    let circle = data.join("distance_circle.json");
    let means = data.join("sorted_means.json");
    let circ_ens = data.join("circle_ensemble.json");
    let commands: Vec<Vec<&str>> = vec![
        vec!["distance", line.to_str().unwrap()],
        vec!["distance", circle.to_str().unwrap()],
        vec!["barycenter", means.to_str().unwrap(), "--mode", "exhaustive"],
        vec!["barycenter", circ_ens.to_str().unwrap(), "--seed", "3"],
        vec!["cluster-consistency", "--n", "300", "--subsamples", "4", "--subsample-size", "80", "--atoms", "15", "--seed", "2"],
        vec!["cluster-consistency", "--method", "spectral", "--n", "150", "--subsamples", "2", "--subsample-size", "60", "--atoms", "10"],
        vec!["toy-ensemble", "--seed", "4"],
        vec!["redistrict", "barycenter", toy, "--M", "10"],
        vec!["redistrict", "compare", toy, "--M", "10"],
        vec!["redistrict", "stability", toy, "--M", "10", "--n-seeds", "4"],
        vec!["redistrict", "sensitivity", toy, "--m-max", "5"],
    ];
    let mut differing = Vec::new();
    for cmd in &commands {
        let reference = run(cmd);
        for threads in ["1", "2", "4"] {
            let args: Vec<&str> = cmd.iter().copied().chain(["--threads", threads]).collect();
            if run(&args) != reference {
                differing.push(format!("{} (--threads {threads})", cmd[..cmd.len().min(2)].join(" ")));
            }
        }
    }
    check(
        differing.is_empty(),
        format!("{} commands x 4 runs (default, 1, 2, 4 threads); differing: {differing:?}", commands.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("assignment exactness", c1_assignment),
        ("metric axioms", c2_metric_axioms),
        ("embedding isometries", c3_isometries),
        ("curvature inequality", c4_curvature),
        ("order-statistics oracle", c5_order_statistics),
        ("stationarity and D trace", c6_stationarity),
        ("termination", c7_termination),
        ("circle multi-seed", c8_circle_seeds),
        ("clustering pipeline", c9_clustering),
        ("redistricting toy", c10_redistricting),
        ("discrepancy metric", c11_discrepancy),
        ("CLI determinism", c12_cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {:>2}. {name}: {detail}", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
