//! Joint association, bandwidth split and power control by block-coordinate
//! gradient ascent on the penalised sum log-throughput.
//!
//! Each outer iteration runs three blocks:
//! 1. association: frozen-load gradient step, coverage projection through
//!    the dual, row repair, with step halving until the step passes the
//!    configured [`AssocAcceptance`] test;
//! 2. split: ε = K_S / K;
//! 3. power: gradient step, block soft-thresholding, clamp to the coverage
//!    floors, with step halving while the objective drops and a growing
//!    step after each accepted move;
//!
//! followed by the reweighting w = 1 / (p + δ).

pub mod objective;
pub mod power;
pub mod projection;
pub mod split;

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::linklayer::{self, one_hot, Allocation};
use crate::scenario::Tier;

pub use objective::{ObjectiveBreakdown, Problem};
pub use projection::DualSolver;

/// Rule for accepting an association step before halving it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssocAcceptance {
    /// Take the step as is.
    Always,
    /// Keep the sum log-throughput from dropping.
    Slt,
    /// Keep the penalised objective from dropping after the power block.
    Objective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlasterConfig {
    pub lambda_max: f64,
    /// Smallest hourly UE count of the plan; λ = λ_max · K_min / K.
    pub k_min: usize,
    /// Largest per-row move of the association step.
    pub assoc_step: f64,
    /// Power gradient step η, also the scalar η of the prox threshold.
    pub power_step: f64,
    /// Factor applied to η after an accepted power step; 1 keeps η fixed.
    pub power_step_growth: f64,
    /// Upper bound on η as a multiple of `power_step`.
    pub power_step_cap: f64,
    pub max_backtracks: usize,
    pub assoc_acceptance: AssocAcceptance,
    pub dual_max_iterations: usize,
    pub dual_tolerance: f64,
    /// δ as a fraction of the largest terrestrial p_max.
    pub delta_fraction: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub epsilon_floor: f64,
    pub epsilon_init: f64,
    /// Keeps satellite power at p_max; only terrestrial power is optimised.
    pub hold_satellite_power: bool,
}

impl Default for BlasterConfig {
    fn default() -> Self {
        BlasterConfig {
            lambda_max: 1e7,
            k_min: 40,
            assoc_step: 0.5,
            power_step: 1.4e-8,
            power_step_growth: 2.0,
            power_step_cap: 1e6,
            max_backtracks: 8,
            assoc_acceptance: AssocAcceptance::Slt,
            dual_max_iterations: 500,
            dual_tolerance: 1e-12,
            delta_fraction: 1e-3,
            max_iterations: 200,
            tolerance: 1e-4,
            epsilon_floor: 1e-3,
            epsilon_init: 0.5,
            hold_satellite_power: true,
        }
    }
}

impl BlasterConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_max", self.lambda_max),
            ("assoc_step", self.assoc_step),
            ("power_step", self.power_step),
            ("dual_tolerance", self.dual_tolerance),
            ("delta_fraction", self.delta_fraction),
            ("tolerance", self.tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{v} is not positive"),
                });
            }
        }
        if !(self.power_step_growth >= 1.0) || !(self.power_step_cap >= 1.0) {
            return Err(Error::InvalidParameter {
                name: "power_step_growth",
                reason: "growth and cap must be at least 1".into(),
            });
        }
        if self.max_iterations == 0 || self.dual_max_iterations == 0 || self.k_min == 0 {
            return Err(Error::InvalidParameter {
                name: "iterations",
                reason: "iteration caps and k_min must be at least 1".into(),
            });
        }
        if !(0.0..0.5).contains(&self.epsilon_floor) || !(0.0..=1.0).contains(&self.epsilon_init) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: "floor must lie in [0, 0.5) and the initial split in [0, 1]".into(),
            });
        }
        Ok(())
    }

    pub fn lambda(&self, k: usize) -> f64 {
        lambda_schedule(self.lambda_max, self.k_min, k)
    }
}

/// λ = λ_max · K_min / K.
pub fn lambda_schedule(lambda_max: f64, k_min: usize, k: usize) -> f64 {
    lambda_max * k_min as f64 / k.max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub f_total: f64,
    pub slt_term: f64,
    pub l1_term: f64,
    pub group_term: f64,
    pub epsilon: f64,
    pub active_mbs_count: usize,
    pub relative_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizerTrace {
    pub rows: Vec<TraceRow>,
    pub converged: bool,
    /// Dual sweeps of every projection call.
    pub dual_iterations: Vec<usize>,
    pub final_mu: Vec<f64>,
    pub final_w: Vec<f64>,
}

impl OptimizerTrace {
    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    pub fn mean_dual_iterations(&self) -> f64 {
        if self.dual_iterations.is_empty() {
            0.0
        } else {
            self.dual_iterations.iter().sum::<usize>() as f64 / self.dual_iterations.len() as f64
        }
    }

    pub const HEADER: [&'static str; 8] = [
        "iteration",
        "f_total",
        "slt_term",
        "l1_term",
        "group_term",
        "epsilon",
        "active_mbs_count",
        "relative_gain",
    ];

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.iteration.to_string(),
                sig9(r.f_total),
                sig9(r.slt_term),
                sig9(r.l1_term),
                sig9(r.group_term),
                sig9(r.epsilon),
                r.active_mbs_count.to_string(),
                sig9(r.relative_gain),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<trace csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlasterOutcome {
    /// Binary allocation after rounding and the final power clamp.
    pub allocation: Allocation,
    pub serving: Vec<usize>,
    /// Relaxed iterate at exit.
    pub relaxed: Allocation,
    pub objective: ObjectiveBreakdown,
    pub lambda: f64,
    pub trace: OptimizerTrace,
}

/// Max-RSRP association at full power; ties go to the lower MBS index.
pub fn max_rsrp_serving(prob: &Problem) -> Result<Vec<usize>> {
    let ch = prob.ch;
    (0..ch.num_ues())
        .map(|i| projection::best_covering(ch, i, prob.rsrp_min_mw).ok_or(Error::UncoverableUe { ue: i }))
        .collect()
}

fn active_terrestrial(p: &[f64], tiers: &[Tier]) -> usize {
    p.iter().zip(tiers).filter(|(v, t)| **v > 0.0 && **t == Tier::Terrestrial).count()
}

fn try_objective(alloc: &Allocation, prob: &Problem, w: &[f64], lambda: f64) -> Option<ObjectiveBreakdown> {
    objective::objective(alloc, prob, w, lambda).ok().filter(|b| b.total.is_finite())
}

/// Split and power blocks on `alloc` in place. On return `eta` holds the
/// step to try next.
fn power_block(alloc: &mut Allocation, prob: &Problem, cfg: &BlasterConfig, w: &[f64], lambda: f64, eta: &mut f64) -> Result<()> {
    let ch = prob.ch;
    let rsrp_min = prob.rsrp_min_mw;
    alloc.epsilon = split::optimal_split(&alloc.x, &ch.tiers, cfg.epsilon_floor);
    let serving = power::serving_with_repair(&alloc.x, ch, rsrp_min)?;
    let p_base = power::power_feasibility_clamp(&alloc.p, ch, &serving, rsrp_min, cfg.hold_satellite_power)?;
    let base_alloc = Allocation { p: p_base, ..alloc.clone() };
    let f_base = objective::objective(&base_alloc, prob, w, lambda)?.total;
    let gp = objective::power_gradient(&base_alloc, prob)?;
    let cap = cfg.power_step * cfg.power_step_cap;
    *alloc = base_alloc.clone();
    for _ in 0..=cfg.max_backtracks {
        let p_tilde = objective::power_gradient_step(&base_alloc.p, *eta, &gp);
        let t = power::prox_threshold(lambda, *eta, w, &prob.psi);
        let p_hat = power::prox_group(&p_tilde, t);
        let p_new = power::power_feasibility_clamp(&p_hat, ch, &serving, rsrp_min, cfg.hold_satellite_power)?;
        let cand = Allocation { p: p_new, ..base_alloc.clone() };
        if try_objective(&cand, prob, w, lambda).is_some_and(|b| b.total >= f_base) {
            *alloc = cand;
            *eta = (*eta * cfg.power_step_growth).min(cap);
            return Ok(());
        }
        *eta *= 0.5;
    }
    Ok(())
}

pub fn run_blaster(prob: &Problem, cfg: &BlasterConfig) -> Result<BlasterOutcome> {
    cfg.validate()?;
    let ch = prob.ch;
    let (k, l) = ch.gain.dim();
    if k == 0 || l == 0 {
        return Err(Error::Dimension("empty network".into()));
    }
    let lambda = cfg.lambda(k);
    let tiers = ch.tiers.clone();
    let solver = DualSolver {
        max_iterations: cfg.dual_max_iterations,
        tolerance: cfg.dual_tolerance,
    };
    let pmax_terr = (0..l)
        .filter(|&j| tiers[j] == Tier::Terrestrial)
        .map(|j| ch.max_power_mw[j])
        .fold(0.0f64, f64::max);
    let pmax_ref = if pmax_terr > 0.0 { pmax_terr } else { ch.max_power_mw.iter().cloned().fold(0.0, f64::max) };
    let delta = cfg.delta_fraction * pmax_ref;
    let rsrp_min = prob.rsrp_min_mw;

    let serving0 = max_rsrp_serving(prob)?;
    let mut alloc = Allocation {
        x: one_hot(&serving0.iter().map(|j| Some(*j)).collect::<Vec<_>>(), l),
        p: ch.max_power_mw.clone(),
        epsilon: cfg.epsilon_init,
    };
    let mut w = vec![1.0; l];
    let mut trace = OptimizerTrace::default();
    let mut last_mu = vec![0.0; k];
    let mut eta_next = cfg.power_step;

    for s in 1..=cfg.max_iterations {
        let start = objective::objective(&alloc, prob, &w, lambda)?;
        let grad = objective::assoc_gradient(&alloc, prob)?;
        let mut base = cfg.assoc_step;
        let mut accepted = None;
        for attempt in 0..=cfg.max_backtracks {
            let alpha = objective::row_scaled_step(&grad, base);
            let xt = objective::assoc_gradient_step(&alloc.x, &alpha, &grad);
            let sol = projection::project_association(&xt, ch, &alloc.p, rsrp_min, &solver)?;
            trace.dual_iterations.push(sol.iterations);
            let mut cand = Allocation { x: sol.x, ..alloc.clone() };
            let last = attempt == cfg.max_backtracks;
            let ok = match cfg.assoc_acceptance {
                AssocAcceptance::Always => true,
                AssocAcceptance::Slt => try_objective(&cand, prob, &w, lambda).is_some_and(|b| b.slt >= start.slt),
                AssocAcceptance::Objective => {
                    // judged after the split and power blocks
                    let mut eta = eta_next;
                    match power_block(&mut cand, prob, cfg, &w, lambda, &mut eta) {
                        Ok(()) if try_objective(&cand, prob, &w, lambda).is_some_and(|b| b.total >= start.total) => {
                            accepted = Some((cand, sol.mu, eta));
                            break;
                        }
                        _ => false,
                    }
                }
            };
            if ok {
                let mut eta = eta_next;
                power_block(&mut cand, prob, cfg, &w, lambda, &mut eta)?;
                accepted = Some((cand, sol.mu, eta));
                break;
            }
            if last {
                // association unchanged; power block alone
                let mut cand = alloc.clone();
                let mut eta = eta_next;
                power_block(&mut cand, prob, cfg, &w, lambda, &mut eta)?;
                accepted = Some((cand, last_mu.clone(), eta));
                break;
            }
            base *= 0.5;
        }
        let (next, mu, eta) = accepted.expect("loop always assigns on its last attempt");
        alloc = next;
        last_mu = mu;
        eta_next = eta;

        let end = objective::objective(&alloc, prob, &w, lambda)?;
        let rel = (end.total - start.total) / start.total.abs().max(f64::MIN_POSITIVE);
        trace.rows.push(TraceRow {
            iteration: s,
            f_total: end.total,
            slt_term: end.slt,
            l1_term: end.l1,
            group_term: end.group,
            epsilon: alloc.epsilon,
            active_mbs_count: active_terrestrial(&alloc.p, &tiers),
            relative_gain: rel,
        });
        w = power::reweight(&alloc.p, delta)?;
        if rel.abs() < cfg.tolerance {
            trace.converged = true;
            break;
        }
    }

    // rounding
    let serving = power::serving_with_repair(&alloc.x, ch, rsrp_min)?;
    let x_bin: Array2<f64> = one_hot(&serving.iter().map(|j| Some(*j)).collect::<Vec<_>>(), l);
    let epsilon = split::optimal_split(&x_bin, &tiers, cfg.epsilon_floor);
    let p_bin = power::power_feasibility_clamp(&alloc.p, ch, &serving, rsrp_min, cfg.hold_satellite_power)?;
    let binary = Allocation { x: x_bin, p: p_bin, epsilon };
    let obj = objective::objective(&binary, prob, &w, lambda)?;
    trace.final_mu = last_mu;
    trace.final_w = w;
    Ok(BlasterOutcome {
        allocation: binary,
        serving,
        relaxed: alloc,
        objective: obj,
        lambda,
        trace,
    })
}

/// Per-UE rates of a binary outcome.
pub fn outcome_rates(out: &BlasterOutcome, prob: &Problem) -> Result<Vec<f64>> {
    linklayer::ue_throughput(&out.allocation, prob.ch, prob.bandwidth(out.allocation.epsilon)?, prob.noise_mw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelState;
    use crate::linklayer::LinkParams;
    use ndarray::array;

    fn prob_for(ch: &ChannelState) -> Problem<'_> {
        let link = LinkParams::default();
        Problem {
            ch,
            psi: vec![100.0; ch.num_mbs()],
            noise_mw: link.noise_mw(),
            total_bandwidth_hz: link.total_bandwidth_hz,
            rsrp_min_mw: link.rsrp_min_mw(),
        }
    }

    #[test]
    fn lambda_schedule_examples() {
        assert_eq!(lambda_schedule(1e7, 40, 40), 1e7);
        assert_eq!(lambda_schedule(1e7, 40, 400), 1e6);
    }

    #[test]
    fn single_link_converges_fast() {
        // negligible penalty: only the split moves, once
        let cfg = BlasterConfig { k_min: 1, lambda_max: 1e-12, ..Default::default() };
        let ch = ChannelState::from_gains(array![[1e-10]], vec![Tier::Terrestrial], vec![58.9]).unwrap();
        let prob = prob_for(&ch);
        let out = run_blaster(&prob, &cfg).unwrap();
        assert!(out.trace.converged);
        assert!(out.trace.iterations() <= 2);
        assert_eq!(out.allocation.epsilon, 1e-3);
        assert_eq!(out.serving, vec![0]);

        let sat = ChannelState::from_gains(array![[1e-10]], vec![Tier::Satellite], vec![38.0]).unwrap();
        let prob = prob_for(&sat);
        let out = run_blaster(&prob, &cfg).unwrap();
        assert_eq!(out.allocation.epsilon, 1.0 - 1e-3);
    }

    #[test]
    fn empty_mbs_is_switched_off() {
        // MBS 2 covers nobody better than MBS 0/1 and ends up silent
        let ch = ChannelState::from_gains(
            array![[1e-9, 1e-12, 1e-13], [1e-12, 1e-9, 1e-13], [1e-9, 1e-12, 1e-13]],
            vec![Tier::Terrestrial; 3],
            vec![58.9; 3],
        )
        .unwrap();
        let prob = prob_for(&ch);
        let out = run_blaster(&prob, &BlasterConfig { k_min: 3, ..Default::default() }).unwrap();
        assert_eq!(out.allocation.p[2], 0.0);
        let first_zero = out.trace.rows.iter().position(|r| r.active_mbs_count < 3);
        assert!(first_zero.is_some_and(|s| s < 50));
        assert!(out.trace.converged);
        for (i, &j) in out.serving.iter().enumerate() {
            assert!(ch.gain[[i, j]] * out.allocation.p[j] >= prob.rsrp_min_mw * (1.0 - 1e-12));
        }
    }

    #[test]
    fn trace_csv_header() {
        let t = OptimizerTrace {
            rows: vec![TraceRow {
                iteration: 1,
                f_total: -1.5,
                slt_term: 2.0,
                l1_term: 3.0,
                group_term: 0.25,
                epsilon: 0.1,
                active_mbs_count: 4,
                relative_gain: 1e-3,
            }],
            ..Default::default()
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "iteration,f_total,slt_term,l1_term,group_term,epsilon,active_mbs_count,relative_gain\n1,-1.5,2,3,0.25,0.1,4,0.001\n"
        );
    }
}
