//! Rank-based association with threshold-driven MBS shutdown.
//!
//! At low traffic every satellite-covered UE goes to the satellite first and
//! lightly loaded terrestrial MBSs are emptied by handover and switched off.
//! At high traffic UEs pick the best-throughput MBS and only empty MBSs are
//! switched off. Active MBSs transmit at their coverage floor.

use serde::{Deserialize, Serialize};

use crate::blaster::objective::Problem;
use crate::blaster::power::coverage_floors;
use crate::blaster::split;
use crate::blaster::{OptimizerTrace, TraceRow};
use crate::error::{Error, Result};
use crate::linklayer::{self, one_hot, Allocation};
use crate::scenario::Tier;
use crate::units::linear_to_db;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeuristicConfig {
    pub t_ue: usize,
    /// Low-traffic hours are `low_traffic_start <= h < low_traffic_end`.
    pub low_traffic_start: usize,
    pub low_traffic_end: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub epsilon_floor: f64,
    pub epsilon_init: f64,
    pub hold_satellite_power: bool,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            t_ue: 3,
            low_traffic_start: 0,
            low_traffic_end: 7,
            tolerance: 1e-4,
            max_iterations: 50,
            epsilon_floor: 1e-3,
            epsilon_init: 0.5,
            hold_satellite_power: true,
        }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_ue == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "heuristic",
                reason: "t_ue and max_iterations must be at least 1".into(),
            });
        }
        if self.low_traffic_start > 23 || self.low_traffic_end > 24 || self.low_traffic_start > self.low_traffic_end {
            return Err(Error::InvalidParameter {
                name: "low_traffic window",
                reason: "must lie within 0..24".into(),
            });
        }
        Ok(())
    }

    pub fn is_low_traffic(&self, hour: usize) -> bool {
        (self.low_traffic_start..self.low_traffic_end).contains(&hour)
    }
}

fn covers(prob: &Problem, p: &[f64], i: usize, j: usize) -> bool {
    prob.ch.gain[[i, j]] * p[j] >= prob.rsrp_min_mw
}

/// UEs by ascending mean RSRP (dBm) over the MBSs that cover them at `p`;
/// UEs with no candidate first, ties by UE index.
pub fn rank_ues(prob: &Problem, p: &[f64]) -> Vec<usize> {
    let ch = prob.ch;
    let key: Vec<Option<f64>> = (0..ch.num_ues())
        .map(|i| {
            let vals: Vec<f64> = (0..ch.num_mbs())
                .filter(|&j| covers(prob, p, i, j))
                .map(|j| linear_to_db(ch.gain[[i, j]] * p[j]))
                .collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect();
    let mut order: Vec<usize> = (0..ch.num_ues()).collect();
    order.sort_by(|&a, &b| match (key[a], key[b]) {
        (None, None) => a.cmp(&b),
        (None, Some(_)) => std::cmp::Ordering::Less,
        (Some(_), None) => std::cmp::Ordering::Greater,
        (Some(x), Some(y)) => x.total_cmp(&y).then(a.cmp(&b)),
    });
    order
}

/// Rate UE `i` would get on `j` with one more UE on `j`.
fn marginal_rate(prob: &Problem, sinr: &ndarray::Array2<f64>, bw: linklayer::TierBandwidth, loads: &[usize], i: usize, j: usize) -> f64 {
    bw.of(prob.ch.tiers[j]) / (loads[j] + 1) as f64 * (1.0 + sinr[[i, j]]).log2()
}

fn best_throughput(prob: &Problem, sinr: &ndarray::Array2<f64>, bw: linklayer::TierBandwidth, loads: &[usize], i: usize, candidates: impl Iterator<Item = usize>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in candidates {
        let r = marginal_rate(prob, sinr, bw, loads, i, j);
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((j, r));
        }
    }
    best.map(|(j, _)| j)
}

/// One-shot association at powers `p`.
pub fn associate(prob: &Problem, p: &[f64], epsilon: f64, low_traffic: bool) -> Result<Vec<usize>> {
    let ch = prob.ch;
    let (k, l) = ch.gain.dim();
    let sinr = linklayer::sinr_matrix(ch, p, prob.noise_mw);
    let bw = prob.bandwidth(epsilon)?;
    let order = rank_ues(prob, p);
    let mut serving = vec![usize::MAX; k];
    let mut loads = vec![0usize; l];
    if low_traffic {
        for &i in &order {
            if let Some(j) = (0..l).find(|&j| ch.is_satellite(j) && covers(prob, p, i, j)) {
                serving[i] = j;
                loads[j] += 1;
            }
        }
    }
    for &i in &order {
        if serving[i] != usize::MAX {
            continue;
        }
        let j = best_throughput(prob, &sinr, bw, &loads, i, (0..l).filter(|&j| covers(prob, p, i, j)))
            .ok_or(Error::UncoverableUe { ue: i })?;
        serving[i] = j;
        loads[j] += 1;
    }
    Ok(serving)
}

fn load_counts(serving: &[usize], l: usize) -> Vec<usize> {
    let mut c = vec![0; l];
    for &j in serving {
        c[j] += 1;
    }
    c
}

/// Switches off lightly loaded terrestrial MBSs whose UEs can all be handed
/// over. Returns the new serving list and the switched-off set in order.
pub fn shutdown_pass(prob: &Problem, serving: &[usize], off: &[bool], epsilon: f64, t_ue: usize, low_traffic: bool) -> Result<(Vec<usize>, Vec<usize>)> {
    let ch = prob.ch;
    let l = ch.num_mbs();
    let mut serving = serving.to_vec();
    let mut off = off.to_vec();
    let mut shut = Vec::new();
    let mut examined = vec![false; l];
    let bw = prob.bandwidth(epsilon)?;
    loop {
        let loads = load_counts(&serving, l);
        let threshold = if low_traffic { t_ue } else { 1 };
        let next = (0..l)
            .filter(|&j| ch.tiers[j] == Tier::Terrestrial && !off[j] && !examined[j] && loads[j] < threshold)
            .min_by_key(|&j| (loads[j], j));
        let Some(b) = next else { break };
        examined[b] = true;
        let served: Vec<usize> = (0..serving.len()).filter(|&i| serving[i] == b).collect();
        let alive = |j: usize| j != b && !off[j];
        let feasible = served
            .iter()
            .all(|&i| (0..l).any(|j| alive(j) && ch.can_cover(i, j, prob.rsrp_min_mw)));
        if !feasible {
            continue;
        }
        // throughput estimates at full power on the surviving network
        let p_ref: Vec<f64> = (0..l).map(|j| if alive(j) { ch.max_power_mw[j] } else { 0.0 }).collect();
        let sinr = linklayer::sinr_matrix(ch, &p_ref, prob.noise_mw);
        let mut loads = loads;
        loads[b] = 0;
        for &i in &served {
            let j = best_throughput(prob, &sinr, bw, &loads, i, (0..l).filter(|&j| alive(j) && ch.can_cover(i, j, prob.rsrp_min_mw)))
                .expect("feasibility checked above");
            serving[i] = j;
            loads[j] += 1;
        }
        off[b] = true;
        shut.push(b);
    }
    Ok((serving, shut))
}

/// Every active MBS at exactly its coverage floor, empty ones at 0.
pub fn power_floor(prob: &Problem, serving: &[usize], hold_satellite: bool) -> Result<Vec<f64>> {
    let ch = prob.ch;
    let tau = coverage_floors(ch, serving, prob.rsrp_min_mw);
    (0..ch.num_mbs())
        .map(|j| {
            if hold_satellite && ch.is_satellite(j) {
                return Ok(ch.max_power_mw[j]);
            }
            if tau[j] > ch.max_power_mw[j] * (1.0 + 1e-12) {
                return Err(Error::InfeasibleCoverage {
                    mbs: j,
                    floor_mw: tau[j],
                    max_mw: ch.max_power_mw[j],
                });
            }
            Ok(tau[j].min(ch.max_power_mw[j]))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicOutcome {
    pub allocation: Allocation,
    pub serving: Vec<usize>,
    pub switched_off: Vec<usize>,
    pub slt: f64,
    pub trace: OptimizerTrace,
}

pub fn run_heuristic(prob: &Problem, hour: usize, cfg: &HeuristicConfig) -> Result<HeuristicOutcome> {
    cfg.validate()?;
    let ch = prob.ch;
    let l = ch.num_mbs();
    let low = cfg.is_low_traffic(hour);
    let mut serving = associate(prob, &ch.max_power_mw, cfg.epsilon_init, low)?;
    let mut off = vec![false; l];
    let mut switched_off = Vec::new();
    let mut trace = OptimizerTrace::default();
    let mut prev: Option<f64> = None;
    let mut alloc = Allocation {
        x: one_hot(&serving.iter().map(|j| Some(*j)).collect::<Vec<_>>(), l),
        p: ch.max_power_mw.clone(),
        epsilon: cfg.epsilon_init,
    };
    let mut slt = f64::NAN;
    for s in 1..=cfg.max_iterations {
        let x = one_hot(&serving.iter().map(|j| Some(*j)).collect::<Vec<_>>(), l);
        let epsilon = split::optimal_split(&x, &ch.tiers, cfg.epsilon_floor);
        let (next, shut) = shutdown_pass(prob, &serving, &off, epsilon, cfg.t_ue, low)?;
        serving = next;
        for b in shut {
            off[b] = true;
            switched_off.push(b);
        }
        let x = one_hot(&serving.iter().map(|j| Some(*j)).collect::<Vec<_>>(), l);
        let epsilon = split::optimal_split(&x, &ch.tiers, cfg.epsilon_floor);
        let p = power_floor(prob, &serving, cfg.hold_satellite_power)?;
        alloc = Allocation { x, p, epsilon };
        let rates = linklayer::ue_throughput(&alloc, ch, prob.bandwidth(epsilon)?, prob.noise_mw)?;
        slt = linklayer::sum_log_throughput(&rates)?;
        let rel = prev.map_or(f64::INFINITY, |q| (slt - q) / q.abs().max(f64::MIN_POSITIVE));
        trace.rows.push(TraceRow {
            iteration: s,
            f_total: slt,
            slt_term: slt,
            l1_term: 0.0,
            group_term: 0.0,
            epsilon,
            active_mbs_count: alloc
                .p
                .iter()
                .zip(&ch.tiers)
                .filter(|(v, t)| **v > 0.0 && **t == Tier::Terrestrial)
                .count(),
            relative_gain: if rel.is_finite() { rel } else { 0.0 },
        });
        if rel.abs() < cfg.tolerance {
            trace.converged = true;
            break;
        }
        prev = Some(slt);
    }
    Ok(HeuristicOutcome {
        allocation: alloc,
        serving,
        switched_off,
        slt,
        trace,
    })
}
