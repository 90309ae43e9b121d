use std::path::Path;

use serde_json::{json, Value};
use symprod_core::barycenter::{local_barycenter, verify_stationary, BarycenterParams};
use symprod_core::clustering::{consistency_experiment, generate_dataset, ConsistencyConfig};
use symprod_core::redistrict::{
    compare_plan, ensemble_barycenter, heatmap_grid, sample_size_sensitivity, seed_stability, toy_plan_generator,
    vote_share_table, RedistrictInput, RedistrictParams, SamplingConfig,
};
use symprod_core::stats::median;
use symprod_core::symprod::wp_distance;
use symprod_core::{Circle, Configuration, Euclidean, Error, GroundSpace};

use crate::error::{CliError, CliResult};
use crate::input::{
    check_version, circle_config, common_dim, euclidean_config, read_json, read_redistrict, BarycenterInput,
    DistanceInput, SpaceTag,
};
use crate::svg::{scatter, Series};
use crate::{ClusterArgs, Cli, Command, ElectionArgs, RedistrictCommand, RunConfig};

/// Tolerance of the stationarity check reported with barycenters.
const STATIONARY_TOL: f64 = 1e-7;

/// Run a command; the second value names an unconverged iteration.
pub fn dispatch(cli: &Cli) -> CliResult<(Value, Option<String>)> {
    let run = &cli.run;
    match &cli.command {
        Command::Distance { input } => distance(input, run).map(|v| (v, None)),
        Command::Barycenter { input, svg } => barycenter(input, svg.as_deref(), run),
        Command::ClusterConsistency(args) => cluster_consistency(args, run),
        Command::Redistrict { action } => redistrict(action, run),
        Command::ToyEnsemble { width, height, k, plans } => {
            let (units, plans) = toy_plan_generator(*width, *height, *k, *plans, run.seed)?;
            Ok((serde_json::to_value(RedistrictInput::new(units, plans))?, None))
        }
    }
}

fn distance(path: &Path, run: &RunConfig) -> CliResult<Value> {
    let input: DistanceInput = read_json(path)?;
    check_version(input.schema_version)?;
    let (d, m) = match input.space {
        SpaceTag::Euclidean => {
            let (a, b) = (euclidean_config(&input.a)?, euclidean_config(&input.b)?);
            let dim = common_dim([&a, &b])?;
            wp_distance(&Euclidean::new(dim), &a, &b, run.p)?
        }
        SpaceTag::Circle => wp_distance(&Circle, &circle_config(&input.a)?, &circle_config(&input.b)?, run.p)?,
    };
    Ok(json!({
        "p": run.p,
        "distance": d,
        "cost": m.cost,
        "matching": m.permutation,
    }))
}

fn barycenter(path: &Path, svg: Option<&Path>, run: &RunConfig) -> CliResult<(Value, Option<String>)> {
    let input: BarycenterInput = read_json(path)?;
    check_version(input.schema_version)?;
    if input.ensemble.is_empty() {
        return Err(CliError::Parse("ensemble is empty".into()));
    }
    let params = run.barycenter_params()?;
    let start_index = (run.seed % input.ensemble.len() as u64) as usize;
    match input.space {
        SpaceTag::Euclidean => {
            let ens = input.ensemble.iter().map(|c| euclidean_config(c)).collect::<CliResult<Vec<_>>>()?;
            let start = match &input.start {
                Some(s) => euclidean_config(s)?,
                None => ens[start_index].clone(),
            };
            let dim = common_dim(ens.iter().chain([&start]))?;
            let (report, partial, res) = barycenter_report(&Euclidean::new(dim), &ens, &start, &params)?;
            if let (Some(path), 2) = (svg, dim) {
                let bary = res.barycenter.points().to_vec();
                let labeled: Vec<Vec<Vec<f64>>> = (0..res.barycenter.k())
                    .map(|i| res.labelings.iter().map(|l| l.representative[i].clone()).collect())
                    .collect();
                let mut series: Vec<Series> =
                    labeled.iter().map(|pts| Series { points: pts, radius: 3.0, opacity: 0.4 }).collect();
                let singles: Vec<Vec<Vec<f64>>> = bary.iter().map(|p| vec![p.clone()]).collect();
                series.extend(singles.iter().map(|pts| Series { points: pts, radius: 7.0, opacity: 1.0 }));
                let colors: Vec<usize> = (0..bary.len()).chain(0..bary.len()).collect();
                std::fs::write(path, scatter(&series, &colors))?;
            }
            Ok((with_start(report, input.start.is_none().then_some(start_index)), partial))
        }
        SpaceTag::Circle => {
            let ens = input.ensemble.iter().map(|c| circle_config(c)).collect::<CliResult<Vec<_>>>()?;
            let start = match &input.start {
                Some(s) => circle_config(s)?,
                None => ens[start_index].clone(),
            };
            let (report, partial, _) = barycenter_report(&Circle, &ens, &start, &params)?;
            Ok((with_start(report, input.start.is_none().then_some(start_index)), partial))
        }
    }
}

fn with_start(mut report: Value, start_index: Option<usize>) -> Value {
    report["start_index"] = json!(start_index);
    report
}

type Report<P> = (Value, Option<String>, symprod_core::BarycenterResult<P>);

fn barycenter_report<G: GroundSpace>(
    space: &G,
    ens: &[Configuration<G::Point>],
    start: &Configuration<G::Point>,
    params: &BarycenterParams,
) -> CliResult<Report<G::Point>>
where
    G::Point: serde::Serialize,
{
    let res = local_barycenter(space, ens, start, params)?;
    let stationarity = match verify_stationary(space, ens, &res.barycenter, params, STATIONARY_TOL) {
        Ok(r) => serde_json::to_value(r)?,
        Err(Error::EnumerationCap(_)) => Value::Null,
        Err(e) => return Err(e.into()),
    };
    let partial = (!res.diagnostics.converged).then(|| "barycenter stopped at max-iters".to_string());
    let report = json!({
        "p": params.p,
        "barycenter": res.barycenter,
        "labelings": res.labelings.iter().map(|l| &l.matching).collect::<Vec<_>>(),
        "diagnostics": res.diagnostics,
        "stationarity": stationarity,
    });
    Ok((report, partial, res))
}

fn cluster_consistency(args: &ClusterArgs, run: &RunConfig) -> CliResult<(Value, Option<String>)> {
    if run.p != 2.0 {
        return Err(CliError::Parse("cluster-consistency works in W_2; use --p 2".into()));
    }
    let cloud = generate_dataset(args.dataset, args.n, run.seed)?;
    let config = ConsistencyConfig {
        method: args.method,
        k: args.k,
        n_subsamples: args.subsamples,
        subsample_size: args.subsample_size,
        m_atoms: run.atoms,
        rng_seed: run.seed,
    };
    let report = consistency_experiment(&cloud, &config, &run.barycenter_params()?)?;
    if let Some(path) = &args.svg {
        let series: Vec<Series> =
            report.barycenter.iter().map(|atoms| Series { points: atoms, radius: 3.0, opacity: 0.8 }).collect();
        let colors: Vec<usize> = (0..series.len()).collect();
        std::fs::write(path, scatter(&series, &colors))?;
    }
    let partial = (!report.diagnostics.converged).then(|| "consistency barycenter stopped at max-iters".to_string());
    let mut value = serde_json::to_value(&report)?;
    value["dataset"] = serde_json::to_value(args.dataset)?;
    value["n"] = json!(args.n);
    Ok((value, partial))
}

fn redistrict_params(run: &RunConfig, k: usize, seed_plan: usize) -> CliResult<RedistrictParams> {
    Ok(RedistrictParams {
        sampling: SamplingConfig { k, m: run.m, weighting: run.weighting, rng_seed: run.seed },
        outer: run.barycenter_params()?,
        inner: BarycenterParams { p: run.p, cost_tol: run.cost_tol, ..BarycenterParams::inner_default() },
        seed_plan_index: seed_plan,
    })
}

fn has_election(input: &RedistrictInput, election: &ElectionArgs) -> bool {
    input.units.iter().all(|u| u.votes.contains_key(&election.election))
}

fn redistrict(action: &RedistrictCommand, run: &RunConfig) -> CliResult<(Value, Option<String>)> {
    match action {
        RedistrictCommand::Barycenter { input, election, seed_plan, heatmap_dir, resolution } => {
            let (input, k) = read_redistrict(input)?;
            let params = redistrict_params(run, k, *seed_plan)?;
            let ens = ensemble_barycenter(&input.plans, &input.units, &params)?;
            let table = if has_election(&input, election) {
                let t = vote_share_table(
                    &ens.labeled,
                    &input.plans,
                    &input.units,
                    &election.election,
                    &election.party_a,
                    &election.party_b,
                    false,
                )?;
                serde_json::to_value(t)?
            } else {
                Value::Null
            };
            if let Some(dir) = heatmap_dir {
                std::fs::create_dir_all(dir)?;
                for label in 0..k {
                    let grid = heatmap_grid(&ens.labeled, &input.plans, &input.units, label, *resolution)?;
                    let csv: String = grid
                        .iter()
                        .map(|row| row.iter().map(u32::to_string).collect::<Vec<_>>().join(",") + "\n")
                        .collect();
                    std::fs::write(dir.join(format!("label_{label}.csv")), csv)?;
                }
            }
            let partial =
                (!ens.result.diagnostics.converged).then(|| "ensemble barycenter stopped at max-iters".to_string());
            let labels: Vec<&Vec<usize>> = ens.labeled.representatives.iter().map(|r| &r.matching.permutation).collect();
            Ok((
                json!({
                    "k": k,
                    "M": params.sampling.m,
                    "weighting": params.sampling.weighting,
                    "seed_plan": seed_plan,
                    "barycenter": ens.result.barycenter,
                    "labels": labels,
                    "ambiguous": ens.labeled.ambiguous,
                    "diagnostics": ens.result.diagnostics,
                    "vote_shares": table,
                }),
                partial,
            ))
        }
        RedistrictCommand::Compare { input, election, seed_plan, outlier_margin } => {
            let (input, k) = read_redistrict(input)?;
            if input.candidates.is_empty() {
                return Err(CliError::Parse("input has no candidate plans".into()));
            }
            let params = redistrict_params(run, k, *seed_plan)?;
            let ens = ensemble_barycenter(&input.plans, &input.units, &params)?;
            let table = vote_share_table(
                &ens.labeled,
                &input.plans,
                &input.units,
                &election.election,
                &election.party_a,
                &election.party_b,
                false,
            )?;
            let mut reports = serde_json::Map::new();
            for (name, plan) in &input.candidates {
                let r = compare_plan(&ens.labeled, &table, plan, &input.units, &params, *outlier_margin)?;
                reports.insert(name.clone(), serde_json::to_value(r)?);
            }
            let partial =
                (!ens.result.diagnostics.converged).then(|| "ensemble barycenter stopped at max-iters".to_string());
            Ok((json!({ "vote_shares": table, "candidates": reports }), partial))
        }
        RedistrictCommand::Stability { input, n_seeds } => {
            let (input, k) = read_redistrict(input)?;
            let params = redistrict_params(run, k, 0)?;
            let d = seed_stability(&input.plans, &input.units, &params, *n_seeds)?;
            let normalized: Vec<f64> = d.iter().map(|x| x.normalized).collect();
            Ok((
                json!({
                    "n_seeds": n_seeds,
                    "discrepancies": d,
                    "median_normalized": median(&normalized),
                }),
                None,
            ))
        }
        RedistrictCommand::Sensitivity { input, m_max, seed_plan } => {
            let (input, k) = read_redistrict(input)?;
            let params = redistrict_params(run, k, *seed_plan)?;
            let d = sample_size_sensitivity(&input.plans, &input.units, *m_max, &params)?;
            Ok((json!({ "m_max": m_max, "discrepancies": d }), None))
        }
    }
}
