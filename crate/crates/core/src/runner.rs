//! Executes an [`ExperimentConfig`]: validates it, runs each experiment,
//! then writes CSV artifacts and a `diagnostics.json` report.
//!
//! Every output is a pure function of the config and the seed; parallel work
//! is always collected back in input order before anything is written.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::artifacts::{
    csv_bytes, csv_table, default_decimation, trajectory_rows, AggregateRow, PlanRow, SweepRow, TraceRow,
    TRAJECTORY_SUFFIX,
};
use crate::config::{
    AllocationExperiment, ConfigError, Experiment, ExperimentConfig, KSweepExperiment, McValidateExperiment,
    OracleValidateExperiment, TimingSweepExperiment, TrajectoryExperiment,
};
use crate::density::{
    mean_field_error_scale, r_trajectory_with, states_at, DensityWalker, RTrajectory, TrajectoryOptions,
};
use crate::diagnostics::{check_convexity, check_mlrp, ratio_bound, ANALYTIC_TOLERANCE, EQUALITY_TOLERANCE};
use crate::error::Error;
use crate::interventions::{
    allocate_accounting_at, allocate_oblivious_at, default_granularity, timing_sweep, AllocationPlan, Region,
};
use crate::profile::{build_profile, ProfileSpec, SpreadingProfile};
use crate::report::{Check, ExperimentReport, RunReport};
use crate::sim::{
    brute_force_curve, draw_population, estimate_r_curve, estimate_r_curve_population, simulate, stream_rng, Population,
};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const DEFAULT_OUT_DIR: &str = "out";

const ORACLE_STREAM: u64 = 2;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error in {0}")]
    Config(#[from] ConfigError),
    #[error("experiment `{experiment}` failed: {source}")]
    Engine {
        experiment: String,
        #[source]
        source: Error,
    },
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("encoding output for `{experiment}`: {source}")]
    Csv {
        experiment: String,
        #[source]
        source: csv::Error,
    },
}

impl RunError {
    /// 1 for configuration problems, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            _ => 2,
        }
    }
}

/// Command-line overrides of the config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub decimate: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: RunReport,
    pub out_dir: PathBuf,
    /// Paths written, in order, ending with the diagnostics report.
    pub outputs: Vec<PathBuf>,
    /// Wall-clock time per experiment; not part of any artifact.
    pub elapsed: Vec<(String, Duration)>,
}

struct Output {
    file: String,
    bytes: Vec<u8>,
}

struct Context {
    seed: u64,
    decimate: Option<u64>,
}

pub fn run(config: &ExperimentConfig, options: &RunOptions) -> Result<RunSummary, RunError> {
    config.validate()?;
    if options.decimate == Some(0) {
        return Err(ConfigError {
            field: "--decimate".into(),
            reason: "must be at least 1".into(),
        }
        .into());
    }
    let ctx = Context {
        seed: options.seed.unwrap_or(config.seed),
        decimate: options.decimate.or(config.decimate),
    };
    let out_dir = options
        .out_dir
        .clone()
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));

    let mut reports = Vec::new();
    let mut outputs = Vec::new();
    let mut elapsed = Vec::new();
    for experiment in &config.experiments {
        let start = Instant::now();
        let (checks, files) = run_experiment(experiment, &ctx)?;
        elapsed.push((experiment.name().to_string(), start.elapsed()));
        let names = files.iter().map(|o| o.file.clone()).collect();
        reports.push(ExperimentReport::new(
            experiment.name(),
            experiment.kind(),
            checks,
            names,
        ));
        for output in files {
            outputs.push(write_file(&out_dir, &output.file, &output.bytes)?);
        }
    }

    let report = RunReport::new(Some(ctx.seed), reports);
    outputs.push(write_file(&out_dir, DIAGNOSTICS_FILE, report.to_json().as_bytes())?);
    Ok(RunSummary {
        report,
        out_dir,
        outputs,
        elapsed,
    })
}

fn write_file(dir: &Path, file: &str, bytes: &[u8]) -> Result<PathBuf, RunError> {
    let path = dir.join(file);
    let io = |source| RunError::Io {
        path: path.clone(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(&path, bytes).map_err(io)?;
    Ok(path)
}

type Outcome = (Vec<Check>, Vec<Output>);

fn run_experiment(experiment: &Experiment, ctx: &Context) -> Result<Outcome, RunError> {
    let name = experiment.name();
    let engine = |source| RunError::Engine {
        experiment: name.to_string(),
        source,
    };
    let csv = |source| RunError::Csv {
        experiment: name.to_string(),
        source,
    };
    let result = match experiment {
        Experiment::Trajectory(e) => trajectory(e, ctx),
        Experiment::KSweep(e) => k_sweep(e, ctx),
        Experiment::McValidate(e) => mc_validate(e, ctx),
        Experiment::OracleValidate(e) => oracle_validate(e, ctx),
        Experiment::Allocation(e) => allocation(e),
        Experiment::TimingSweep(e) => timing(e),
    };
    match result {
        Ok(outcome) => Ok(outcome),
        Err(Failure::Engine(e)) => Err(engine(e)),
        Err(Failure::Csv(e)) => Err(csv(e)),
    }
}

enum Failure {
    Engine(Error),
    Csv(csv::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Csv(e)
    }
}

type Step<T> = Result<T, Failure>;

fn fmt_param(x: f64) -> String {
    format!("{x}")
}

fn trajectory_output(name: &str, traj: &RTrajectory, ctx: &Context) -> Step<Output> {
    let decimate = ctx.decimate.unwrap_or_else(|| default_decimation(traj.n0));
    Ok(Output {
        file: format!("{name}{TRAJECTORY_SUFFIX}"),
        bytes: csv_bytes(&trajectory_rows(traj, decimate))?,
    })
}

type StepPairs = Vec<(u64, u64)>;

/// Evenly spaced consecutive pairs `(n, n + 1)` and nested long-range pairs.
fn sample_pairs(len: usize, consecutive: usize, long_range: usize) -> (StepPairs, StepPairs) {
    let mut near = Vec::new();
    if len >= 2 && consecutive > 0 {
        let top = (len - 2) as u64;
        let count = consecutive.min(len - 1) as u64;
        for j in 0..count {
            let n = if count == 1 { 0 } else { j * top / (count - 1) };
            near.push((n, n + 1));
        }
        near.dedup();
    }
    let mut far = Vec::new();
    if len >= 4 && long_range > 0 {
        let last = (len - 1) as u64;
        let count = long_range as u64;
        for j in 0..count {
            let n1 = (j * last / (2 * count)).max(1);
            let n2 = last - j * last / (2 * count);
            if n1 < n2 {
                far.push((n1, n2));
            }
        }
        far.dedup();
    }
    (near, far)
}

/// Convexity, likelihood-ratio ordering and the ratio bound on one trajectory.
fn trajectory_checks(
    profile: &SpreadingProfile,
    traj: &RTrajectory,
    mlrp_pairs: usize,
    ratio_pairs: usize,
    label: &str,
) -> Step<Vec<Check>> {
    let tag = |check: &str| {
        if label.is_empty() {
            check.to_string()
        } else {
            format!("{check}[{label}]")
        }
    };
    let mut checks = Vec::new();
    if traj.len() >= 3 {
        let c = check_convexity(&traj.values)?;
        checks.push(Check::upper(
            tag("convexity"),
            c.max_violation,
            c.tolerance,
            Some(c.location),
        ));
    }

    let (near, far) = sample_pairs(traj.len(), mlrp_pairs, ratio_pairs);
    let mut steps: Vec<u64> = near.iter().chain(&far).flat_map(|&(a, b)| [a, b]).collect();
    steps.sort_unstable();
    steps.dedup();
    let states = states_at(profile, &steps)?;
    let state = |n: u64| &states[steps.binary_search(&n).expect("sampled step")];

    for (pairs, which) in [(&near, "mlrp_consecutive"), (&far, "mlrp_long_range")] {
        if pairs.is_empty() {
            continue;
        }
        let (mut worst, mut at) = (f64::NEG_INFINITY, 0);
        for &(a, b) in pairs.iter() {
            let r = check_mlrp(state(a), state(b))?;
            let v = r.max_ratio_violation.max(r.max_dominance_violation);
            if v > worst {
                worst = v;
                at = a;
            }
        }
        checks.push(
            Check::upper(tag(which), worst, ANALYTIC_TOLERANCE, Some(at)).with_detail(serde_json::json!({
                "pairs": pairs.len()
            })),
        );
    }

    if !far.is_empty() {
        let (mut worst, mut at) = (f64::NEG_INFINITY, 0);
        for &(n1, n2) in &far {
            let r = ratio_bound(traj.n0, &traj.values, n1, n2)?;
            if -r.slack > worst {
                worst = -r.slack;
                at = n2;
            }
        }
        checks.push(Check::upper(tag("ratio_bound"), worst, ANALYTIC_TOLERANCE, Some(at)));
    }
    Ok(checks)
}

fn trajectory(e: &TrajectoryExperiment, ctx: &Context) -> Step<Outcome> {
    let profile = build_profile(&e.profile)?;
    let traj = r_trajectory_with(
        &profile,
        TrajectoryOptions {
            overshoot: e.overshoot,
            max_steps: None,
        },
    )?;
    let checks = trajectory_checks(&profile, &traj, e.mlrp_pairs, e.ratio_pairs, "")?;
    Ok((checks, vec![trajectory_output(&e.name, &traj, ctx)?]))
}

#[derive(Serialize)]
struct HitRow {
    k: f64,
    hit_step: Option<u64>,
    hit_fraction: Option<f64>,
}

fn k_sweep(e: &KSweepExperiment, ctx: &Context) -> Step<Outcome> {
    let runs =
        e.k.par_iter()
            .map(|&k| -> Step<(f64, RTrajectory, Vec<Check>)> {
                let spec = ProfileSpec::gamma(k, e.correlation, e.n0, e.r0).with_atom_count(e.atom_count);
                let profile = build_profile(&spec)?;
                let options = TrajectoryOptions {
                    overshoot: e.overshoot,
                    max_steps: None,
                };
                let traj = r_trajectory_with(&profile, options)?;
                let checks = trajectory_checks(&profile, &traj, e.mlrp_pairs, e.ratio_pairs, &format!("k={k}"))?;
                Ok((k, traj, checks))
            })
            .collect::<Vec<_>>();

    let mut checks = Vec::new();
    let mut outputs = Vec::new();
    let mut hits = Vec::new();
    for run in runs {
        let (k, traj, c) = run?;
        checks.extend(c);
        outputs.push(trajectory_output(&format!("{}_k{}", e.name, fmt_param(k)), &traj, ctx)?);
        hits.push(HitRow {
            k,
            hit_step: traj.hit_step,
            hit_fraction: traj.hit_fraction,
        });
    }

    // Lower shape, more heterogeneity, earlier crossing.
    let mut by_k: Vec<&HitRow> = hits.iter().collect();
    by_k.sort_by(|a, b| a.k.total_cmp(&b.k));
    if by_k.len() >= 2 {
        let fractions: Vec<Option<f64>> = by_k.iter().map(|h| h.hit_fraction).collect();
        let mut worst = f64::NEG_INFINITY;
        let mut at = None;
        let mut strictly = true;
        for (j, w) in fractions.windows(2).enumerate() {
            let gap = match (w[0], w[1]) {
                (Some(lo), Some(hi)) => lo - hi,
                _ => f64::INFINITY,
            };
            strictly &= gap < 0.0;
            if gap > worst {
                worst = gap;
                at = Some(j as u64);
            }
        }
        checks.push(
            Check::upper("hit_decreasing_with_heterogeneity", worst, 0.0, at)
                .with_passed(strictly)
                .with_detail(serde_json::json!({
                    "k": by_k.iter().map(|h| h.k).collect::<Vec<_>>(),
                    "hit_fraction": fractions,
                })),
        );
    }

    outputs.push(Output {
        file: format!("{}.hit.csv", e.name),
        bytes: csv_table(&["k", "hit_step", "hit_fraction"], &hits)?,
    });
    Ok((checks, outputs))
}

fn mc_validate(e: &McValidateExperiment, ctx: &Context) -> Step<Outcome> {
    let profile = build_profile(&e.profile)?;
    let n0 = profile.n0();
    let steps = e.steps.unwrap_or(n0 as usize);
    let estimate = estimate_r_curve(&profile, n0, steps, e.replicas, ctx.seed)?;
    let engine = r_trajectory_with(
        &profile,
        TrajectoryOptions {
            overshoot: n0,
            max_steps: Some(steps as u64),
        },
    )?;

    let compared = steps.min(engine.len());
    let (mut worst, mut at) = (f64::NEG_INFINITY, 0);
    for n in 0..compared {
        let excess = (estimate.mean[n] - engine.values[n]).abs() - e.sigmas * estimate.stderr[n];
        if excess > worst {
            worst = excess;
            at = n as u64;
        }
    }
    let checks = vec![
        Check::upper("mc_vs_engine", worst, e.gap_fraction * profile.r0(), Some(at)).with_detail(serde_json::json!({
            "replicas": e.replicas,
            "compared_steps": compared,
            "sigmas": e.sigmas,
        })),
    ];

    let aggregate: Vec<AggregateRow> = (0..steps)
        .map(|n| AggregateRow {
            n: n as u64,
            mean_r: estimate.mean[n],
            stderr: estimate.stderr[n],
        })
        .collect();
    let traces = (0..e.trace_replicas as u64)
        .into_par_iter()
        .map(|i| -> Step<Vec<TraceRow>> {
            let seed = ctx.seed.wrapping_add(i);
            let pop = draw_population(&profile, seed)?;
            let trace = simulate(&pop, steps, seed)?;
            Ok(trace
                .r_hat
                .iter()
                .enumerate()
                .map(|(n, &r_hat)| TraceRow {
                    replica: i,
                    n: n as u64,
                    r_hat,
                })
                .collect())
        })
        .collect::<Vec<_>>();
    let mut trace_rows = Vec::new();
    for t in traces {
        trace_rows.extend(t?);
    }

    let outputs = vec![
        Output {
            file: format!("{}.aggregate.csv", e.name),
            bytes: csv_table(&["n", "mean_r", "stderr"], &aggregate)?,
        },
        Output {
            file: format!("{}.trace.csv", e.name),
            bytes: csv_table(&["replica", "n", "r_hat"], &trace_rows)?,
        },
        trajectory_output(&e.name, &engine, ctx)?,
    ];
    Ok((checks, outputs))
}

/// Random small population with `phi` non-decreasing in `s`.
pub fn random_population(rng: &mut impl Rng, min_nodes: usize, max_nodes: usize) -> Vec<(f64, f64)> {
    let count = rng.random_range(min_nodes..=max_nodes);
    let mut s: Vec<f64> = (0..count).map(|_| rng.random_range(0.05..1.0)).collect();
    let mut phi: Vec<f64> = (0..count).map(|_| rng.random_range(0.05..1.0)).collect();
    s.sort_by(f64::total_cmp);
    phi.sort_by(f64::total_cmp);
    s.into_iter().zip(phi).collect()
}

/// Density-engine `R(n)` of an explicit population with the mean-field error
/// scale at each step, for as many steps as the engine can take.
pub fn engine_curve(nodes: &[(f64, f64)]) -> Result<Vec<(f64, f64)>, Error> {
    let profile = Population::from_pairs(nodes)?.to_profile()?;
    let mut walker = DensityWalker::new(&profile);
    let mut out = Vec::new();
    loop {
        let state = walker.state();
        out.push((walker.reproduction_number(), mean_field_error_scale(&state, &profile)));
        if walker.remaining() < 2 || walker.advance().is_err() {
            break;
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct OracleRow {
    population: usize,
    n: usize,
    brute: f64,
    engine: Option<f64>,
    bound: Option<f64>,
    mc_mean: f64,
    mc_stderr: f64,
}

#[derive(Serialize)]
struct NodeRow {
    population: usize,
    node: usize,
    s: f64,
    phi: f64,
}

fn oracle_validate(e: &OracleValidateExperiment, ctx: &Context) -> Step<Outcome> {
    let mut rng = stream_rng(ctx.seed, ORACLE_STREAM);
    let populations: Vec<Vec<(f64, f64)>> = (0..e.populations)
        .map(|_| random_population(&mut rng, e.min_nodes, e.max_nodes))
        .collect();

    let mut rows = Vec::new();
    let mut nodes = Vec::new();
    let (mut worst_bound, mut bound_at) = (f64::NEG_INFINITY, (0, 0));
    let (mut worst_z, mut z_at) = (f64::NEG_INFINITY, (0, 0));
    for (p, pop) in populations.iter().enumerate() {
        let brute = brute_force_curve(pop)?;
        let engine = engine_curve(pop)?;
        let base = ctx.seed.wrapping_add((p * e.replicas) as u64);
        let mc = estimate_r_curve_population(&Population::from_pairs(pop)?, pop.len(), e.replicas, base)?;
        for (i, &(s, phi)) in pop.iter().enumerate() {
            nodes.push(NodeRow {
                population: p,
                node: i,
                s,
                phi,
            });
        }
        for (n, &b) in brute.iter().enumerate() {
            if let Some(&(r, scale)) = engine.get(n) {
                if r > 0.0 {
                    let ratio = (r - b).abs() / (scale * r);
                    if ratio > worst_bound {
                        worst_bound = ratio;
                        bound_at = (p, n);
                    }
                }
            }
            let diff = (mc.mean[n] - b).abs();
            let z = if mc.stderr[n] > 0.0 {
                diff / mc.stderr[n]
            } else if diff <= EQUALITY_TOLERANCE * b.abs().max(1.0) {
                0.0
            } else {
                f64::INFINITY
            };
            if z > worst_z {
                worst_z = z;
                z_at = (p, n);
            }
            rows.push(OracleRow {
                population: p,
                n,
                brute: b,
                engine: engine.get(n).map(|x| x.0),
                bound: engine.get(n).map(|x| x.1),
                mc_mean: mc.mean[n],
                mc_stderr: mc.stderr[n],
            });
        }
    }

    let checks = vec![
        Check::upper(
            "engine_within_mean_field_bound",
            worst_bound,
            1.0 + EQUALITY_TOLERANCE,
            Some(bound_at.1 as u64),
        )
        .with_detail(serde_json::json!({ "population": bound_at.0 })),
        Check::upper("mc_vs_enumeration_sigmas", worst_z, e.sigmas, Some(z_at.1 as u64))
            .with_detail(serde_json::json!({ "population": z_at.0, "replicas": e.replicas })),
    ];
    let outputs = vec![
        Output {
            file: format!("{}.oracle.csv", e.name),
            bytes: csv_table(
                &["population", "n", "brute", "engine", "bound", "mc_mean", "mc_stderr"],
                &rows,
            )?,
        },
        Output {
            file: format!("{}.populations.csv", e.name),
            bytes: csv_table(&["population", "node", "s", "phi"], &nodes)?,
        },
    ];
    Ok((checks, outputs))
}

#[derive(Serialize)]
struct InfectionsRow {
    k: f64,
    inv_k: f64,
    supply: u64,
    policy: &'static str,
    total_infections: u64,
}

#[derive(Serialize)]
struct RelativeRow {
    k: f64,
    inv_k: f64,
    supply: u64,
    relative_difference: f64,
}

fn plan_csv(plan: &AllocationPlan) -> csv::Result<Vec<u8>> {
    let mut rows: Vec<PlanRow> = plan
        .names
        .iter()
        .zip(&plan.vaccines)
        .zip(&plan.predicted_infections)
        .map(|((region, &vaccines), &predicted_infections)| PlanRow {
            region: region.clone(),
            vaccines,
            predicted_infections,
        })
        .collect();
    rows.push(PlanRow {
        region: "total".into(),
        vaccines: plan.allocated(),
        predicted_infections: plan.total_infections,
    });
    csv_bytes(&rows)
}

/// `(oblivious - accounting) / oblivious`.
pub fn relative_difference(accounting: u64, oblivious: u64) -> f64 {
    if oblivious == 0 {
        0.0
    } else {
        (oblivious as f64 - accounting as f64) / oblivious as f64
    }
}

fn allocation(e: &AllocationExperiment) -> Step<Outcome> {
    let homogeneous = Region::new(
        "homogeneous",
        build_profile(&ProfileSpec::homogeneous_calibrated(e.n0, e.r0))?,
    );
    let mut infections = Vec::new();
    let mut relative = Vec::new();
    let mut outputs = Vec::new();
    let mut unverified = Vec::new();
    let (mut worst_excess, mut excess_at) = (i64::MIN, None);

    for &k in &e.k {
        let spec = ProfileSpec::gamma(k, e.correlation, e.n0, e.r0).with_atom_count(e.atom_count);
        let regions = vec![homogeneous.clone(), Region::new("gamma", build_profile(&spec)?)];
        for &supply in &e.supplies {
            let g = e.granularity.unwrap_or_else(|| default_granularity(supply));
            let accounting = allocate_accounting_at(&regions, supply, g, e.timing)?;
            let oblivious = allocate_oblivious_at(&regions, supply, g, e.timing)?;
            for (plan, policy) in [(&accounting, "accounting"), (&oblivious, "oblivious")] {
                outputs.push(Output {
                    file: format!("{}_k{}_s{supply}_{policy}.plan.csv", e.name, fmt_param(k)),
                    bytes: plan_csv(plan)?,
                });
                infections.push(InfectionsRow {
                    k,
                    inv_k: 1.0 / k,
                    supply,
                    policy,
                    total_infections: plan.total_infections,
                });
            }
            if !accounting.convexity_verified {
                unverified.push(serde_json::json!({ "k": k, "supply": supply, "policy": "accounting" }));
            }
            let excess = accounting.total_infections as i64 - oblivious.total_infections as i64;
            if excess > worst_excess {
                worst_excess = excess;
                excess_at = Some(supply);
            }
            relative.push(RelativeRow {
                k,
                inv_k: 1.0 / k,
                supply,
                relative_difference: relative_difference(accounting.total_infections, oblivious.total_infections),
            });
        }
    }

    let mut checks = vec![
        Check::upper("accounting_not_worse", worst_excess as f64, 0.0, excess_at),
        Check::upper("cost_convexity_verified", unverified.len() as f64, 0.0, None).with_detail(unverified),
    ];
    for &supply in &e.supplies {
        let mut line: Vec<&RelativeRow> = relative.iter().filter(|r| r.supply == supply).collect();
        if line.len() < 2 {
            continue;
        }
        line.sort_by(|a, b| a.k.total_cmp(&b.k));
        // Strictly larger gains at lower shape.
        let worst = line
            .windows(2)
            .map(|w| w[1].relative_difference - w[0].relative_difference)
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(
            Check::upper(
                format!("relative_difference_increasing[s={supply}]"),
                worst,
                0.0,
                Some(supply),
            )
            .with_passed(worst < 0.0),
        );
    }

    outputs.push(Output {
        file: format!("{}.infections.csv", e.name),
        bytes: csv_table(&["k", "inv_k", "supply", "policy", "total_infections"], &infections)?,
    });
    outputs.push(Output {
        file: format!("{}.relative.csv", e.name),
        bytes: csv_table(&["k", "inv_k", "supply", "relative_difference"], &relative)?,
    });
    Ok((checks, outputs))
}

fn timing(e: &TimingSweepExperiment) -> Step<Outcome> {
    let region = Region::new(e.name.clone(), build_profile(&e.profile)?);
    let sweep = timing_sweep(&region, e.vaccines, &e.timings)?;
    let mut order: Vec<usize> = (0..sweep.timings.len()).collect();
    order.sort_by_key(|&i| sweep.timings[i]);
    let worst = order
        .windows(2)
        .map(|w| sweep.costs[w[0]] as f64 - sweep.costs[w[1]] as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    let check = Check::upper("cost_non_decreasing_in_timing", worst.max(0.0), 0.0, None)
        .with_passed(sweep.non_decreasing)
        .with_detail(serde_json::json!({ "spread": sweep.spread }));
    let rows: Vec<SweepRow> = order
        .iter()
        .map(|&i| SweepRow {
            param: sweep.timings[i],
            cost: sweep.costs[i],
        })
        .collect();
    let output = Output {
        file: format!("{}.sweep.csv", e.name),
        bytes: csv_table(&["param", "cost"], &rows)?,
    };
    Ok((vec![check], vec![output]))
}
