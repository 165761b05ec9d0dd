//! Fixed-configuration reference policies: max-RSRP association, full
//! power, fixed bandwidths.

use serde::{Deserialize, Serialize};

use crate::blaster::objective::Problem;
use crate::error::{Error, Result};
use crate::linklayer::{self, one_hot, Allocation, TierBandwidth};
use crate::scenario::Tier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Benchmark {
    #[serde(rename = "3GPP-TN")]
    Tn,
    #[serde(rename = "3GPP-NTN")]
    Ntn,
    #[serde(rename = "3GPP-ENERGY-SAVING")]
    EnergySaving,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub name: &'static str,
    pub satellite: bool,
    pub terrestrial_hz: f64,
    pub satellite_hz: f64,
    pub shutdown_empty: bool,
}

impl Benchmark {
    pub fn spec(self) -> BenchmarkSpec {
        match self {
            Benchmark::Tn => BenchmarkSpec {
                name: "3GPP-TN",
                satellite: false,
                terrestrial_hz: 10e6,
                satellite_hz: 0.0,
                shutdown_empty: false,
            },
            Benchmark::Ntn => BenchmarkSpec {
                name: "3GPP-NTN",
                satellite: true,
                terrestrial_hz: 10e6,
                satellite_hz: 30e6,
                shutdown_empty: false,
            },
            Benchmark::EnergySaving => BenchmarkSpec {
                name: "3GPP-ENERGY-SAVING",
                shutdown_empty: true,
                ..Benchmark::Tn.spec()
            },
        }
    }
}

impl BenchmarkSpec {
    pub fn bandwidth(&self) -> TierBandwidth {
        TierBandwidth {
            satellite_hz: self.satellite_hz,
            terrestrial_hz: self.terrestrial_hz,
        }
    }

    /// Satellite share of the configured band.
    pub fn epsilon(&self) -> f64 {
        let total = self.satellite_hz + self.terrestrial_hz;
        if total > 0.0 {
            self.satellite_hz / total
        } else {
            0.0
        }
    }
}

/// Rate assigned to a UE in outage so that its log term is zero.
pub const OUTAGE_RATE_BPS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutcome {
    pub allocation: Allocation,
    pub serving: Vec<Option<usize>>,
    pub rates: Vec<f64>,
    pub slt: f64,
    pub outage: usize,
}

/// Strongest MBS at full power among the allowed ones, if it reaches
/// RSRP_min. Ties go to the lower index.
fn max_rsrp(prob: &Problem, i: usize, allowed: impl Fn(usize) -> bool) -> Option<usize> {
    let ch = prob.ch;
    let mut best: Option<(usize, f64)> = None;
    for j in (0..ch.num_mbs()).filter(|&j| allowed(j)) {
        let r = ch.rsrp_mw(i, j, ch.max_power_mw[j]);
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((j, r));
        }
    }
    best.filter(|&(_, r)| r >= prob.rsrp_min_mw).map(|(j, _)| j)
}

pub fn run_benchmark(spec: &BenchmarkSpec, prob: &Problem) -> Result<BenchmarkOutcome> {
    let ch = prob.ch;
    let l = ch.num_mbs();
    if !spec.satellite && ch.tiers.iter().all(|t| *t == Tier::Satellite) {
        return Err(Error::InvalidParameter {
            name: "benchmark",
            reason: format!("{} needs at least one terrestrial MBS", spec.name),
        });
    }
    let serving: Vec<Option<usize>> = (0..ch.num_ues())
        .map(|i| max_rsrp(prob, i, |j| spec.satellite || ch.tiers[j] == Tier::Terrestrial))
        .collect();
    let x = one_hot(&serving, l);
    let load = linklayer::loads(&x);
    let p: Vec<f64> = (0..l)
        .map(|j| {
            let unused = !spec.satellite && ch.is_satellite(j);
            let idle = spec.shutdown_empty && load[j] == 0.0;
            if unused || idle {
                0.0
            } else {
                ch.max_power_mw[j]
            }
        })
        .collect();
    let sinr = linklayer::sinr_matrix(ch, &p, prob.noise_mw);
    let mut rates = linklayer::rates_with_loads(&x, &sinr, &ch.tiers, spec.bandwidth(), &load);
    let mut outage = 0;
    for (r, s) in rates.iter_mut().zip(&serving) {
        if s.is_none() {
            *r = OUTAGE_RATE_BPS;
            outage += 1;
        }
    }
    let slt = linklayer::sum_log_throughput(&rates)?;
    Ok(BenchmarkOutcome {
        allocation: Allocation {
            x,
            p,
            epsilon: spec.epsilon(),
        },
        serving,
        rates,
        slt,
        outage,
    })
}
