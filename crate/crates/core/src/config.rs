//! TOML run configuration. Every table is optional and falls back to the
//! desk-scale defaults; unknown keys are rejected.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::benchmarks::Benchmark;
use crate::blaster::BlasterConfig;
use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::heuristic::HeuristicConfig;
use crate::linklayer::{EnergyParams, LinkParams};
use crate::scenario::{AreaSpec, PositionLabel, PopulationSpec, SiteParams, TrafficProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Policy {
    #[serde(rename = "BLASTER")]
    Blaster,
    #[serde(rename = "HEURISTIC")]
    Heuristic,
    #[serde(rename = "3GPP-TN")]
    Tn,
    #[serde(rename = "3GPP-NTN")]
    Ntn,
    #[serde(rename = "3GPP-ENERGY-SAVING")]
    EnergySaving,
}

impl Policy {
    pub const ALL: [Policy; 5] = [
        Policy::Blaster,
        Policy::Heuristic,
        Policy::Tn,
        Policy::Ntn,
        Policy::EnergySaving,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Blaster => "BLASTER",
            Policy::Heuristic => "HEURISTIC",
            Policy::Tn => "3GPP-TN",
            Policy::Ntn => "3GPP-NTN",
            Policy::EnergySaving => "3GPP-ENERGY-SAVING",
        }
    }

    pub fn benchmark(self) -> Option<Benchmark> {
        match self {
            Policy::Tn => Some(Benchmark::Tn),
            Policy::Ntn => Some(Benchmark::Ntn),
            Policy::EnergySaving => Some(Benchmark::EnergySaving),
            _ => None,
        }
    }

    /// Whether the result depends on λ_max.
    pub fn uses_lambda(self) -> bool {
        self == Policy::Blaster
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        Policy::ALL
            .into_iter()
            .find(|p| p.as_str() == norm || p.as_str().trim_start_matches("3GPP-") == norm)
            .ok_or_else(|| Error::Config(format!("unknown policy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    /// 24 hourly UE counts before scaling.
    pub profile: TrafficProfile,
    pub scale: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            profile: TrafficProfile::default(),
            scale: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SatelliteGeometry {
    pub altitude_km: f64,
    pub offset_km: f64,
    pub positions: Vec<PositionLabel>,
}

impl Default for SatelliteGeometry {
    fn default() -> Self {
        SatelliteGeometry {
            altitude_km: 600.0,
            offset_km: 50.0,
            positions: vec![PositionLabel::P1, PositionLabel::P2, PositionLabel::P3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanConfig {
    pub hours: Vec<usize>,
    pub seeds: Vec<u64>,
    pub policies: Vec<Policy>,
    pub lambda_max: Vec<f64>,
    /// High-traffic summary window, `start <= h < end`.
    pub high_traffic_start: usize,
    pub high_traffic_end: usize,
    pub write_traces: bool,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            hours: (0..24).collect(),
            seeds: vec![1, 2, 3],
            policies: Policy::ALL.to_vec(),
            lambda_max: vec![1e7],
            high_traffic_start: 12,
            high_traffic_end: 22,
            write_traces: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub area: AreaSpec,
    pub terrestrial_site: SiteParams,
    pub satellite_site: SiteParams,
    pub population: PopulationSpec,
    pub traffic: TrafficConfig,
    pub satellite: SatelliteGeometry,
    pub channel: ChannelParams,
    pub link: LinkParams,
    pub energy: EnergyParams,
    pub blaster: BlasterConfig,
    pub heuristic: HeuristicConfig,
    pub plan: PlanConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            area: AreaSpec::desk(),
            terrestrial_site: SiteParams::terrestrial_default(),
            satellite_site: SiteParams::satellite_default(),
            population: PopulationSpec::default(),
            traffic: TrafficConfig::default(),
            satellite: SatelliteGeometry::default(),
            channel: ChannelParams::default(),
            link: LinkParams::default(),
            energy: EnergyParams::default(),
            blaster: BlasterConfig::default(),
            heuristic: HeuristicConfig::default(),
            plan: PlanConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.area.validate()?;
        self.population.validate()?;
        self.traffic.profile.validate()?;
        self.channel.validate()?;
        self.link.validate()?;
        self.blaster.validate()?;
        self.heuristic.validate()?;
        if !(self.traffic.scale > 0.0 && self.traffic.scale.is_finite()) {
            return Err(Error::Config("traffic.scale must be positive".into()));
        }
        let plan = &self.plan;
        if plan.policies.is_empty() {
            return Err(Error::Config("plan.policies must not be empty".into()));
        }
        if plan.hours.is_empty() || plan.hours.iter().any(|&h| h > 23) {
            return Err(Error::Config("plan.hours must be a nonempty subset of 0..=23".into()));
        }
        if plan.seeds.is_empty() {
            return Err(Error::Config("plan.seeds must not be empty".into()));
        }
        if plan.lambda_max.is_empty() || plan.lambda_max.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::Config("plan.lambda_max must hold finite nonnegative values".into()));
        }
        if plan.high_traffic_start >= plan.high_traffic_end || plan.high_traffic_end > 24 {
            return Err(Error::Config("high-traffic window must satisfy start < end <= 24".into()));
        }
        if self.satellite.positions.is_empty() {
            return Err(Error::Config("satellite.positions must not be empty".into()));
        }
        Ok(())
    }
}
