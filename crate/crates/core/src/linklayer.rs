//! SINR, per-link and per-UE throughput, sum log-throughput and energy.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::scenario::{Mbs, Tier};
use crate::units::{dbm_to_mw, noise_power_mw};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkParams {
    pub total_bandwidth_hz: f64,
    /// Bandwidth over which per-RE power and noise are both accounted.
    pub re_bandwidth_hz: f64,
    pub noise_density_dbm_per_hz: f64,
    pub rsrp_min_dbm: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            total_bandwidth_hz: 40e6,
            re_bandwidth_hz: 15e3,
            noise_density_dbm_per_hz: -174.0,
            rsrp_min_dbm: -120.0,
        }
    }
}

impl LinkParams {
    pub fn noise_mw(&self) -> f64 {
        noise_power_mw(self.noise_density_dbm_per_hz, self.re_bandwidth_hz)
    }

    pub fn rsrp_min_mw(&self) -> f64 {
        dbm_to_mw(self.rsrp_min_dbm)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_bandwidth_hz > 0.0 && self.re_bandwidth_hz > 0.0) {
            return Err(Error::InvalidParameter {
                name: "bandwidth",
                reason: "bandwidths must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Association weights, per-RE powers (mW) and satellite bandwidth fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub x: Array2<f64>,
    pub p: Vec<f64>,
    pub epsilon: f64,
}

impl Allocation {
    pub fn num_ues(&self) -> usize {
        self.x.nrows()
    }

    pub fn num_mbs(&self) -> usize {
        self.x.ncols()
    }

    /// Serving MBS of every one-hot row; `None` for an all-zero row.
    pub fn serving(&self) -> Vec<Option<usize>> {
        serving_of(&self.x)
    }

    pub fn is_binary(&self) -> bool {
        self.x.rows().into_iter().all(|r| {
            r.iter().all(|v| *v == 0.0 || *v == 1.0) && r.iter().filter(|v| **v == 1.0).count() == 1
        })
    }
}

/// Per-UE argmax of positive weight; ties go to the lowest MBS index.
pub fn serving_of(x: &Array2<f64>) -> Vec<Option<usize>> {
    x.rows()
        .into_iter()
        .map(|r| {
            let mut best: Option<(usize, f64)> = None;
            for (j, v) in r.iter().enumerate() {
                if *v > 0.0 && best.is_none_or(|(_, b)| *v > b) {
                    best = Some((j, *v));
                }
            }
            best.map(|(j, _)| j)
        })
        .collect()
}

/// One-hot association matrix from a serving list.
pub fn one_hot(serving: &[Option<usize>], num_mbs: usize) -> Array2<f64> {
    let mut x = Array2::zeros((serving.len(), num_mbs));
    for (i, s) in serving.iter().enumerate() {
        if let Some(j) = s {
            x[[i, *j]] = 1.0;
        }
    }
    x
}

/// Bandwidth available to each tier, Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierBandwidth {
    pub satellite_hz: f64,
    pub terrestrial_hz: f64,
}

impl TierBandwidth {
    pub fn of(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Satellite => self.satellite_hz,
            Tier::Terrestrial => self.terrestrial_hz,
        }
    }
}

pub fn split_bandwidth(epsilon: f64, total_hz: f64) -> Result<TierBandwidth> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("{epsilon} outside [0, 1]"),
        });
    }
    Ok(TierBandwidth {
        satellite_hz: epsilon * total_hz,
        terrestrial_hz: (1.0 - epsilon) * total_hz,
    })
}

/// Served mass per MBS, Σ_i x_ij.
pub fn loads(x: &Array2<f64>) -> Vec<f64> {
    x.sum_axis(ndarray::Axis(0)).to_vec()
}

/// SINR of UE `i` on MBS `j` against an explicit interferer set.
pub fn sinr_with(ch: &ChannelState, p: &[f64], i: usize, j: usize, interferers: &[usize], noise_mw: f64) -> f64 {
    let interference: f64 = interferers.iter().map(|&m| ch.gain[[i, m]] * p[m]).sum();
    ch.gain[[i, j]] * p[j] / (interference + noise_mw)
}

/// Other MBSs of the same tier as `j`; silent ones add nothing.
pub fn same_tier_interferers(ch: &ChannelState, j: usize) -> Vec<usize> {
    (0..ch.num_mbs())
        .filter(|&m| m != j && ch.tiers[m] == ch.tiers[j])
        .collect()
}

pub fn sinr(ch: &ChannelState, p: &[f64], i: usize, j: usize, noise_mw: f64) -> f64 {
    sinr_with(ch, p, i, j, &same_tier_interferers(ch, j), noise_mw)
}

/// All K x L SINRs using per-tier received totals.
pub fn sinr_matrix(ch: &ChannelState, p: &[f64], noise_mw: f64) -> Array2<f64> {
    let (k, l) = ch.gain.dim();
    let mut out = Array2::zeros((k, l));
    for i in 0..k {
        let mut total = [0.0f64; 2];
        for j in 0..l {
            total[tier_slot(ch.tiers[j])] += ch.gain[[i, j]] * p[j];
        }
        for j in 0..l {
            let s = ch.gain[[i, j]] * p[j];
            let others = (total[tier_slot(ch.tiers[j])] - s).max(0.0);
            out[[i, j]] = s / (others + noise_mw);
        }
    }
    out
}

pub(crate) fn tier_slot(t: Tier) -> usize {
    match t {
        Tier::Terrestrial => 0,
        Tier::Satellite => 1,
    }
}

/// Equal-share mean throughput (bit/s) of one link.
pub fn mean_throughput(sinr: f64, bandwidth_hz: f64, load: f64) -> Result<f64> {
    if !(load > 0.0) {
        return Err(Error::InvalidParameter {
            name: "load",
            reason: "throughput is undefined on an empty MBS".into(),
        });
    }
    Ok(bandwidth_hz / load * (1.0 + sinr).log2())
}

/// Per-UE rates for given loads. All-zero rows give rate 0.
pub fn rates_with_loads(x: &Array2<f64>, sinr: &Array2<f64>, tiers: &[Tier], bw: TierBandwidth, loads: &[f64]) -> Vec<f64> {
    let per_mbs: Vec<f64> = tiers.iter().map(|t| bw.of(*t)).collect();
    x.rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| v * per_mbs[j] / loads[j] * (1.0 + sinr[[i, j]]).log2())
                .sum()
        })
        .collect()
}

/// Per-UE rates with loads taken from `alloc.x` itself.
pub fn ue_rates(alloc: &Allocation, ch: &ChannelState, bw: TierBandwidth, noise_mw: f64) -> Vec<f64> {
    let g = sinr_matrix(ch, &alloc.p, noise_mw);
    rates_with_loads(&alloc.x, &g, &ch.tiers, bw, &loads(&alloc.x))
}

/// Rates of every UE; an all-zero association row is an error.
pub fn ue_throughput(alloc: &Allocation, ch: &ChannelState, bw: TierBandwidth, noise_mw: f64) -> Result<Vec<f64>> {
    if let Some(i) = alloc
        .x
        .rows()
        .into_iter()
        .position(|r| r.iter().all(|v| *v <= 0.0))
    {
        return Err(Error::OrphanUe { ue: i });
    }
    Ok(ue_rates(alloc, ch, bw, noise_mw))
}

/// Σ ln R_i.
pub fn sum_log_throughput(rates: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for (i, r) in rates.iter().enumerate() {
        if !(*r > 0.0) {
            return Err(Error::NonPositiveRate { ue: i, rate: *r });
        }
        s += r.ln();
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyParams {
    /// Satellite baseline energy per snapshot, J.
    pub satellite_baseline_j: f64,
    pub snapshot_s: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            satellite_baseline_j: 500.0,
            snapshot_s: 3600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    /// Instantaneous consumption Q_j, W.
    pub per_mbs_w: Vec<f64>,
    pub tn_power_w: f64,
    pub tn_energy_j: f64,
    pub satellite_energy_j: f64,
    pub active_terrestrial: usize,
}

/// Q = P0 + c·p + ψ·1[p > 0].
pub fn mbs_power_w(mbs: &Mbs, p_mw: f64) -> f64 {
    let on = if p_mw > 0.0 { 1.0 } else { 0.0 };
    mbs.baseline_power_w + mbs.dynamic_w_per_mw * p_mw + mbs.static_power_w * on
}

/// Energy of one snapshot. `satellite_in_use` is false for terrestrial-only
/// policies, whose satellite energy is reported as 0.
pub fn energy(p: &[f64], roster: &[Mbs], params: &EnergyParams, satellite_in_use: bool) -> Result<EnergyReport> {
    if p.len() != roster.len() {
        return Err(Error::Dimension(format!("{} powers for {} MBSs", p.len(), roster.len())));
    }
    let per_mbs_w: Vec<f64> = roster.iter().zip(p).map(|(m, &pj)| mbs_power_w(m, pj)).collect();
    let mut tn = 0.0;
    let mut sat = 0.0;
    let mut active = 0;
    for ((m, q), &pj) in roster.iter().zip(&per_mbs_w).zip(p) {
        match m.tier {
            Tier::Terrestrial => {
                tn += q;
                if pj > 0.0 {
                    active += 1;
                }
            }
            Tier::Satellite => sat += q,
        }
    }
    Ok(EnergyReport {
        tn_energy_j: tn * params.snapshot_s,
        satellite_energy_j: if satellite_in_use {
            params.satellite_baseline_j + sat * params.snapshot_s
        } else {
            0.0
        },
        per_mbs_w,
        tn_power_w: tn,
        active_terrestrial: active,
    })
}
