//! Daily sweep over hours, seeds, satellite positions, policies and λ_max.

pub mod metrics;
pub mod output;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::benchmarks::run_benchmark;
use crate::blaster::objective::Problem;
use crate::blaster::{run_blaster, OptimizerTrace};
use crate::channel::ChannelState;
use crate::config::{Config, Policy};
use crate::error::Result;
use crate::heuristic::run_heuristic;
use crate::linklayer::{self, energy, Allocation};
use crate::par::{self, Execution};
use crate::rng::derive_seed;
use crate::scenario::{self, Mbs, PositionLabel, SatellitePosition, Scenario, Tier};

pub use metrics::{complexity_estimate, relative_gain, ComplexityEstimate, DailySummary, HourlyMetrics};

/// Outcome of one policy on one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub hour: usize,
    pub seed: u64,
    pub position: PositionLabel,
    pub policy: Policy,
    pub lambda_index: usize,
    pub lambda_max: f64,
    pub k: usize,
    pub l: usize,
    pub satellite_fraction: f64,
    pub epsilon: f64,
    pub slt: f64,
    pub tn_energy_j: f64,
    pub satellite_energy_j: f64,
    pub active_tn_mbs: usize,
    pub outage: usize,
    pub complexity: ComplexityEstimate,
    pub converged: bool,
    pub coverage_violations: usize,
    pub power_violations: usize,
    #[serde(skip)]
    pub trace: Option<OptimizerTrace>,
}

/// A scenario and its channel at one satellite position.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub scenario: Scenario,
    pub channel: ChannelState,
}

/// Smallest scaled hourly UE count of the day, the K_min of the λ schedule.
pub fn plan_k_min(cfg: &Config) -> Result<usize> {
    scenario::ue_count_at(cfg.traffic.profile.argmin_hour(), &cfg.traffic.profile, cfg.traffic.scale)
}

pub fn position(cfg: &Config, label: PositionLabel) -> Result<SatellitePosition> {
    let all = scenario::satellite_positions(cfg.satellite.altitude_km, cfg.satellite.offset_km)?;
    Ok(all.into_iter().find(|p| p.label == label).expect("every label has a position"))
}

fn position_index(label: PositionLabel) -> u64 {
    match label {
        PositionLabel::P1 => 1,
        PositionLabel::P2 => 2,
        PositionLabel::P3 => 3,
    }
}

/// UEs are resampled every hour; the channel is drawn independently for each
/// satellite position.
pub fn build_snapshot(cfg: &Config, grid: &[Mbs], hour: usize, seed: u64, label: PositionLabel, exec: Execution) -> Result<Snapshot> {
    let k = scenario::ue_count_at(hour, &cfg.traffic.profile, cfg.traffic.scale)?;
    let ue_seed = derive_seed(&[seed, hour as u64]);
    let ues = scenario::sample_ues(k, &cfg.area, &cfg.population, ue_seed)?;
    let sc = Scenario::assemble(hour, seed, cfg.area.clone(), grid.to_vec(), &cfg.satellite_site, position(cfg, label)?, ues);
    let ch_seed = derive_seed(&[seed, hour as u64, position_index(label)]);
    let channel = ChannelState::build(&sc, &cfg.channel, ch_seed, exec)?;
    Ok(Snapshot { scenario: sc, channel })
}

fn coverage_violations(ch: &ChannelState, serving: &[Option<usize>], p: &[f64], rsrp_min: f64) -> usize {
    serving
        .iter()
        .enumerate()
        .filter(|(i, s)| matches!(s, Some(j) if ch.gain[[*i, *j]] * p[*j] < rsrp_min * (1.0 - 1e-9)))
        .count()
}

fn power_violations(ch: &ChannelState, p: &[f64]) -> usize {
    p.iter()
        .zip(&ch.max_power_mw)
        .filter(|(v, m)| !(**v >= 0.0 && **v <= *m * (1.0 + 1e-12)))
        .count()
}

struct Evaluated {
    serving: Vec<Option<usize>>,
    allocation_p: Vec<f64>,
    epsilon: f64,
    slt: f64,
    outage: usize,
    satellite_in_use: bool,
    complexity: ComplexityEstimate,
    converged: bool,
    trace: Option<OptimizerTrace>,
}

/// Restricts an optimiser to the UEs that some MBS can cover at full power;
/// the rest are in outage and contribute log(1 bit/s) = 0.
fn run_optimizer(
    snap: &Snapshot,
    cfg: &Config,
    f: impl FnOnce(&Problem) -> Result<(Vec<usize>, Allocation, f64, OptimizerTrace, bool)>,
    policy: Policy,
) -> Result<Evaluated> {
    let ch = &snap.channel;
    let rmin = cfg.link.rsrp_min_mw();
    let coverable: Vec<usize> = (0..ch.num_ues())
        .filter(|&i| (0..ch.num_mbs()).any(|j| ch.can_cover(i, j, rmin)))
        .collect();
    let sub = ch.select_ues(&coverable);
    let prob = Problem::new(&sub, &snap.scenario.mbs, &cfg.link)?;
    let (served, alloc, slt, trace, converged) = f(&prob)?;
    let mut serving = vec![None; ch.num_ues()];
    for (r, &i) in coverable.iter().enumerate() {
        serving[i] = Some(served[r]);
    }
    let satellite_in_use = served.iter().any(|&j| ch.is_satellite(j));
    Ok(Evaluated {
        complexity: complexity_estimate(policy, ch.num_ues(), ch.num_mbs(), Some(&trace)),
        serving,
        allocation_p: alloc.p,
        epsilon: alloc.epsilon,
        slt,
        outage: ch.num_ues() - coverable.len(),
        satellite_in_use,
        converged,
        trace: Some(trace),
    })
}

fn evaluate(policy: Policy, snap: &Snapshot, cfg: &Config, lambda_max: f64, k_min: usize) -> Result<Evaluated> {
    let ch = &snap.channel;
    match policy {
        Policy::Blaster => {
            let mut bc = cfg.blaster.clone();
            bc.lambda_max = lambda_max;
            bc.k_min = k_min;
            run_optimizer(
                snap,
                cfg,
                |prob| {
                    let out = run_blaster(prob, &bc)?;
                    let rates = crate::blaster::outcome_rates(&out, prob)?;
                    let slt = linklayer::sum_log_throughput(&rates)?;
                    let converged = out.trace.converged;
                    Ok((out.serving, out.allocation, slt, out.trace, converged))
                },
                policy,
            )
        }
        Policy::Heuristic => run_optimizer(
            snap,
            cfg,
            |prob| {
                let out = run_heuristic(prob, snap.scenario.hour, &cfg.heuristic)?;
                let converged = out.trace.converged;
                Ok((out.serving, out.allocation, out.slt, out.trace, converged))
            },
            policy,
        ),
        Policy::Tn | Policy::Ntn | Policy::EnergySaving => {
            let spec = policy.benchmark().expect("benchmark policy").spec();
            let prob = Problem::new(ch, &snap.scenario.mbs, &cfg.link)?;
            let out = run_benchmark(&spec, &prob)?;
            Ok(Evaluated {
                complexity: complexity_estimate(policy, ch.num_ues(), ch.num_mbs(), None),
                serving: out.serving,
                allocation_p: out.allocation.p,
                epsilon: out.allocation.epsilon,
                slt: out.slt,
                outage: out.outage,
                satellite_in_use: spec.satellite,
                converged: true,
                trace: None,
            })
        }
    }
}

/// Runs `policies` on one snapshot, BLASTER once per λ_max and the others
/// once with their record repeated for each λ_max.
pub fn evaluate_snapshot(snap: &Snapshot, cfg: &Config, policies: &[Policy], lambdas: &[f64], k_min: usize) -> Result<Vec<RunRecord>> {
    let ch = &snap.channel;
    let rmin = cfg.link.rsrp_min_mw();
    let mut out = Vec::new();
    for &policy in policies {
        let runs: Vec<(Vec<usize>, Evaluated)> = if policy.uses_lambda() {
            lambdas
                .iter()
                .enumerate()
                .map(|(li, &lm)| evaluate(policy, snap, cfg, lm, k_min).map(|e| (vec![li], e)))
                .collect::<Result<_>>()?
        } else {
            vec![((0..lambdas.len()).collect(), evaluate(policy, snap, cfg, lambdas[0], k_min)?)]
        };
        for (indices, ev) in runs {
            let report = energy(&ev.allocation_p, &snap.scenario.mbs, &cfg.energy, ev.satellite_in_use)?;
            let k = ch.num_ues();
            let on_satellite = ev.serving.iter().flatten().filter(|&&j| ch.tiers[j] == Tier::Satellite).count();
            for li in indices {
                out.push(RunRecord {
                    hour: snap.scenario.hour,
                    seed: snap.scenario.seed,
                    position: snap.scenario.satellite.label,
                    policy,
                    lambda_index: li,
                    lambda_max: lambdas[li],
                    k,
                    l: ch.num_mbs(),
                    satellite_fraction: on_satellite as f64 / k as f64,
                    epsilon: ev.epsilon,
                    slt: ev.slt,
                    tn_energy_j: report.tn_energy_j,
                    satellite_energy_j: report.satellite_energy_j,
                    active_tn_mbs: report.active_terrestrial,
                    outage: ev.outage,
                    complexity: ev.complexity.clone(),
                    converged: ev.converged,
                    coverage_violations: coverage_violations(ch, &ev.serving, &ev.allocation_p, rmin),
                    power_violations: power_violations(ch, &ev.allocation_p),
                    trace: ev.trace.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// A validated plan: the resolved config plus execution settings.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub config: Config,
    pub exec: Execution,
    pub workers: Option<usize>,
}

impl RunPlan {
    pub fn new(config: Config) -> Result<Self> {
        config.validate()?;
        Ok(RunPlan {
            config,
            exec: Execution::Parallel,
            workers: None,
        })
    }

    pub fn policies(&self) -> &[Policy] {
        &self.config.plan.policies
    }
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub records: Vec<RunRecord>,
    pub hourly: Vec<HourlyMetrics>,
    pub summary: Vec<DailySummary>,
    pub k_min: usize,
}

/// Runs every (hour, seed, position) snapshot, in parallel when enabled.
/// 3GPP-TN is always evaluated so relative gains are defined; its rows are
/// only reported when it is part of the plan.
pub fn run_plan(plan: &RunPlan) -> Result<PlanResult> {
    let cfg = &plan.config;
    let grid = scenario::build_grid(&cfg.area, &cfg.terrestrial_site)?;
    let k_min = plan_k_min(cfg)?;
    let mut policies = plan.policies().to_vec();
    if !policies.contains(&Policy::Tn) {
        policies.push(Policy::Tn);
    }
    let mut jobs = Vec::new();
    for &hour in &cfg.plan.hours {
        for &seed in &cfg.plan.seeds {
            for &label in &cfg.satellite.positions {
                jobs.push((hour, seed, label));
            }
        }
    }
    let results: Vec<Result<Vec<RunRecord>>> = par::with_workers(plan.workers, || {
        par::map_collect(plan.exec, jobs, |(hour, seed, label)| {
            let snap = build_snapshot(cfg, &grid, hour, seed, label, Execution::Sequential)?;
            evaluate_snapshot(&snap, cfg, &policies, &cfg.plan.lambda_max, k_min)
        })
    });
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    records.sort_by(|a, b| {
        (a.hour, a.policy, a.lambda_index, a.seed, a.position).cmp(&(b.hour, b.policy, b.lambda_index, b.seed, b.position))
    });
    let hourly = metrics::hourly(&records, &cfg.plan.lambda_max)?
        .into_iter()
        .filter(|m| plan.policies().contains(&m.policy))
        .collect::<Vec<_>>();
    let summary = metrics::daily_summary(&hourly, cfg);
    Ok(PlanResult {
        records,
        hourly,
        summary,
        k_min,
    })
}

/// Runs the plan and writes every output file into `out_dir`.
pub fn run_and_write(plan: &RunPlan, out_dir: &Path) -> Result<(PlanResult, Vec<PathBuf>)> {
    let result = run_plan(plan)?;
    let files = output::write_all(plan, &result, out_dir)?;
    Ok((result, files))
}

