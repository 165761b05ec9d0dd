use std::collections::BTreeMap;

use serde::Serialize;

use super::RunRecord;
use crate::blaster::OptimizerTrace;
use crate::config::{Config, Policy};
use crate::error::{Error, Result};
use crate::fmt::sig9;

/// 100·(metric − baseline)/|baseline|.
pub fn relative_gain(metric: f64, baseline: f64) -> Result<f64> {
    if baseline == 0.0 {
        return Err(Error::ZeroBaseline);
    }
    Ok(100.0 * (metric - baseline) / baseline.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityEstimate {
    pub policy: Policy,
    pub k: usize,
    pub l: usize,
    /// I_blaster or I_H; 1 for the single-pass benchmarks.
    pub outer_iterations: usize,
    /// Mean I_μ (BLASTER only).
    pub inner_iterations: Option<f64>,
    pub operations: f64,
}

/// BLASTER: I_blaster·I_μ·K·L. Heuristic: I_H·K·L. Benchmarks: K·L.
pub fn complexity_estimate(policy: Policy, k: usize, l: usize, trace: Option<&OptimizerTrace>) -> ComplexityEstimate {
    let kl = (k * l) as f64;
    let outer = trace.map_or(1, OptimizerTrace::iterations);
    let inner = (policy == Policy::Blaster).then(|| trace.map_or(0.0, OptimizerTrace::mean_dual_iterations));
    ComplexityEstimate {
        policy,
        k,
        l,
        outer_iterations: outer,
        inner_iterations: inner,
        operations: outer as f64 * inner.unwrap_or(1.0) * kl,
    }
}

/// Per-hour means over seeds and satellite positions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HourlyMetrics {
    pub hour: usize,
    pub policy: Policy,
    pub lambda_max: f64,
    pub k: f64,
    pub satellite_fraction: f64,
    pub epsilon: f64,
    pub slt: f64,
    pub slt_gain_vs_tn_pct: f64,
    pub tn_energy_j: f64,
    pub satellite_energy_j: f64,
    pub active_tn_mbs: f64,
    pub outage: f64,
    pub operations: f64,
}

impl HourlyMetrics {
    pub const HEADER: [&'static str; 13] = [
        "hour",
        "policy",
        "lambda_max",
        "k",
        "satellite_fraction",
        "epsilon",
        "slt",
        "slt_gain_vs_tn_pct",
        "tn_energy_j",
        "satellite_energy_j",
        "active_tn_mbs",
        "outage",
        "operations",
    ];

    fn numbers(&self) -> [f64; 10] {
        [
            self.k,
            self.satellite_fraction,
            self.epsilon,
            self.slt,
            self.slt_gain_vs_tn_pct,
            self.tn_energy_j,
            self.satellite_energy_j,
            self.active_tn_mbs,
            self.outage,
            self.operations,
        ]
    }

    pub fn record(&self) -> Vec<String> {
        let mut r = vec![self.hour.to_string(), self.policy.to_string(), sig9(self.lambda_max)];
        r.extend(self.numbers().iter().map(|v| sig9(*v)));
        r
    }

    /// Every value replaced by its nine-digit rendering, so aggregates match
    /// what a reader recomputes from the CSV.
    fn rounded(&self) -> Self {
        let r = |v: f64| sig9(v).parse::<f64>().expect("sig9 output parses");
        HourlyMetrics {
            hour: self.hour,
            policy: self.policy,
            lambda_max: r(self.lambda_max),
            k: r(self.k),
            satellite_fraction: r(self.satellite_fraction),
            epsilon: r(self.epsilon),
            slt: r(self.slt),
            slt_gain_vs_tn_pct: r(self.slt_gain_vs_tn_pct),
            tn_energy_j: r(self.tn_energy_j),
            satellite_energy_j: r(self.satellite_energy_j),
            active_tn_mbs: r(self.active_tn_mbs),
            outage: r(self.outage),
            operations: r(self.operations),
        }
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Groups records by (hour, policy, λ index) and averages them. Relative
/// gains compare the averaged SLT with the averaged 3GPP-TN SLT.
pub fn hourly(records: &[RunRecord], lambdas: &[f64]) -> Result<Vec<HourlyMetrics>> {
    let mut groups: BTreeMap<(usize, Policy, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.hour, r.policy, r.lambda_index)).or_default().push(r);
    }
    let mut rows = Vec::new();
    for (&(hour, policy, li), rs) in &groups {
        let slt = mean(rs.iter().map(|r| r.slt));
        rows.push(HourlyMetrics {
            hour,
            policy,
            lambda_max: lambdas[li],
            k: mean(rs.iter().map(|r| r.k as f64)),
            satellite_fraction: mean(rs.iter().map(|r| r.satellite_fraction)),
            epsilon: mean(rs.iter().map(|r| r.epsilon)),
            slt,
            slt_gain_vs_tn_pct: f64::NAN,
            tn_energy_j: mean(rs.iter().map(|r| r.tn_energy_j)),
            satellite_energy_j: mean(rs.iter().map(|r| r.satellite_energy_j)),
            active_tn_mbs: mean(rs.iter().map(|r| r.active_tn_mbs as f64)),
            outage: mean(rs.iter().map(|r| r.outage as f64)),
            operations: mean(rs.iter().map(|r| r.complexity.operations)),
        });
    }
    let baseline: BTreeMap<(usize, u64), f64> = rows
        .iter()
        .filter(|m| m.policy == Policy::Tn)
        .map(|m| ((m.hour, m.lambda_max.to_bits()), m.slt))
        .collect();
    for m in &mut rows {
        let b = baseline
            .get(&(m.hour, m.lambda_max.to_bits()))
            .ok_or_else(|| Error::Config(format!("no 3GPP-TN baseline for hour {}", m.hour)))?;
        m.slt_gain_vs_tn_pct = if m.policy == Policy::Tn { 0.0 } else { relative_gain(m.slt, *b)? };
    }
    Ok(rows.iter().map(HourlyMetrics::rounded).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Window {
    Day,
    Low,
    High,
}

impl Window {
    pub fn as_str(self) -> &'static str {
        match self {
            Window::Day => "day",
            Window::Low => "low",
            Window::High => "high",
        }
    }

    pub fn contains(self, hour: usize, cfg: &Config) -> bool {
        match self {
            Window::Day => true,
            Window::Low => cfg.heuristic.is_low_traffic(hour),
            Window::High => (cfg.plan.high_traffic_start..cfg.plan.high_traffic_end).contains(&hour),
        }
    }
}

/// Means of the hourly rows of one (policy, λ_max) over a window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailySummary {
    pub policy: Policy,
    pub lambda_max: f64,
    pub window: Window,
    pub hours: usize,
    pub means: HourlyMetrics,
}

impl DailySummary {
    pub const HEADER: [&'static str; 14] = [
        "policy",
        "lambda_max",
        "window",
        "hours",
        "mean_k",
        "mean_satellite_fraction",
        "mean_epsilon",
        "mean_slt",
        "mean_slt_gain_vs_tn_pct",
        "mean_tn_energy_j",
        "mean_satellite_energy_j",
        "mean_active_tn_mbs",
        "mean_outage",
        "mean_operations",
    ];

    pub fn record(&self) -> Vec<String> {
        let mut r = vec![
            self.policy.to_string(),
            sig9(self.lambda_max),
            self.window.as_str().to_string(),
            self.hours.to_string(),
        ];
        r.extend(self.means.numbers().iter().map(|v| sig9(*v)));
        r
    }
}

pub fn daily_summary(hourly: &[HourlyMetrics], cfg: &Config) -> Vec<DailySummary> {
    let mut keys: Vec<(Policy, u64)> = hourly.iter().map(|m| (m.policy, m.lambda_max.to_bits())).collect();
    keys.sort();
    keys.dedup();
    let mut out = Vec::new();
    for (policy, bits) in keys {
        for window in [Window::Day, Window::Low, Window::High] {
            let rows: Vec<&HourlyMetrics> = hourly
                .iter()
                .filter(|m| m.policy == policy && m.lambda_max.to_bits() == bits && window.contains(m.hour, cfg))
                .collect();
            if rows.is_empty() {
                continue;
            }
            let avg = |f: fn(&HourlyMetrics) -> f64| mean(rows.iter().map(|m| f(m)));
            out.push(DailySummary {
                policy,
                lambda_max: f64::from_bits(bits),
                window,
                hours: rows.len(),
                means: HourlyMetrics {
                    hour: 0,
                    policy,
                    lambda_max: f64::from_bits(bits),
                    k: avg(|m| m.k),
                    satellite_fraction: avg(|m| m.satellite_fraction),
                    epsilon: avg(|m| m.epsilon),
                    slt: avg(|m| m.slt),
                    slt_gain_vs_tn_pct: avg(|m| m.slt_gain_vs_tn_pct),
                    tn_energy_j: avg(|m| m.tn_energy_j),
                    satellite_energy_j: avg(|m| m.satellite_energy_j),
                    active_tn_mbs: avg(|m| m.active_tn_mbs),
                    outage: avg(|m| m.outage),
                    operations: avg(|m| m.operations),
                },
            });
        }
    }
    out
}
