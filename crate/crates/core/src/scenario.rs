//! Deployment snapshots: terrestrial hex grid, UE population, diurnal traffic
//! and the three satellite positions.
//!
//! Coordinates are kilometres with the origin at the centre of the study
//! area; `z` is height above ground.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Terrestrial,
    Satellite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Zone {
    Urban,
    Rural,
}

impl Zone {
    pub fn as_str(self) -> &'static str {
        match self {
            Zone::Urban => "urban",
            Zone::Rural => "rural",
        }
    }
}

/// Study area: a rectangle with a centred rectangular urban core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaSpec {
    pub side_x_km: f64,
    pub side_y_km: f64,
    pub urban_x_km: f64,
    pub urban_y_km: f64,
    pub urban_isd_m: f64,
    pub rural_isd_m: f64,
}

impl AreaSpec {
    /// 50 km x 50 km with a 13.86 km urban core; this partition puts the
    /// default grid close to 1776 sites.
    pub fn full_scale() -> Self {
        AreaSpec {
            side_x_km: 50.0,
            side_y_km: 50.0,
            urban_x_km: 13.86,
            urban_y_km: 13.86,
            urban_isd_m: 500.0,
            rural_isd_m: 1732.0,
        }
    }

    /// Small area giving 19 terrestrial sites (7 urban, 12 rural).
    pub fn desk() -> Self {
        AreaSpec {
            side_x_km: 7.0,
            side_y_km: 5.5,
            urban_x_km: 1.0,
            urban_y_km: 1.0,
            urban_isd_m: 500.0,
            rural_isd_m: 1732.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.side_x_km,
            self.side_y_km,
            self.urban_x_km,
            self.urban_y_km,
            self.urban_isd_m,
            self.rural_isd_m,
        ];
        if all.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidArea(
                "extents and inter-site distances must be positive".into(),
            ));
        }
        if self.urban_x_km >= self.side_x_km || self.urban_y_km >= self.side_y_km {
            return Err(Error::InvalidArea(
                "urban region must lie strictly inside the study area".into(),
            ));
        }
        Ok(())
    }

    pub fn area_km2(&self) -> f64 {
        self.side_x_km * self.side_y_km
    }

    pub fn in_urban(&self, x_km: f64, y_km: f64) -> bool {
        x_km.abs() <= self.urban_x_km / 2.0 && y_km.abs() <= self.urban_y_km / 2.0
    }

    pub fn contains(&self, x_km: f64, y_km: f64) -> bool {
        x_km.abs() <= self.side_x_km / 2.0 + 1e-9 && y_km.abs() <= self.side_y_km / 2.0 + 1e-9
    }

    pub fn zone_of(&self, x_km: f64, y_km: f64) -> Zone {
        if self.in_urban(x_km, y_km) {
            Zone::Urban
        } else {
            Zone::Rural
        }
    }
}

/// Radio and energy parameters shared by every site of a tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteParams {
    pub height_m: f64,
    pub max_power_dbm: f64,
    pub antenna_gain_dbi: f64,
    /// Static (load-independent) power, W.
    pub static_power_w: f64,
    /// Power drawn while shut down, W.
    pub baseline_power_w: f64,
    /// W of supply power per mW of per-RE transmit power.
    pub dynamic_w_per_mw: f64,
}

impl SiteParams {
    pub fn terrestrial_default() -> Self {
        SiteParams {
            height_m: 25.0,
            max_power_dbm: 17.7,
            antenna_gain_dbi: 14.0,
            static_power_w: 100.0,
            baseline_power_w: 40.0,
            dynamic_w_per_mw: 2.4,
        }
    }

    pub fn satellite_default() -> Self {
        SiteParams {
            height_m: 600_000.0,
            max_power_dbm: 15.8,
            antenna_gain_dbi: 30.0,
            static_power_w: 100.0,
            baseline_power_w: 40.0,
            dynamic_w_per_mw: 2.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mbs {
    pub id: usize,
    pub tier: Tier,
    /// Zone of a terrestrial site; `None` for satellites.
    pub zone: Option<Zone>,
    pub x_km: f64,
    pub y_km: f64,
    pub z_km: f64,
    pub max_power_dbm: f64,
    pub antenna_gain_dbi: f64,
    pub static_power_w: f64,
    pub baseline_power_w: f64,
    pub dynamic_w_per_mw: f64,
}

impl Mbs {
    pub fn max_power_mw(&self) -> f64 {
        crate::units::dbm_to_mw(self.max_power_dbm)
    }

    pub fn is_satellite(&self) -> bool {
        self.tier == Tier::Satellite
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ue {
    pub id: usize,
    pub x_km: f64,
    pub y_km: f64,
    pub z_km: f64,
    pub indoor: bool,
    /// Horizontal distance travelled inside the building (m); 0 outdoors.
    pub indoor_depth_m: f64,
    pub zone: Zone,
    pub antenna_gain_dbi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub urban_share: f64,
    pub indoor_ratio: f64,
    pub antenna_gain_dbi: f64,
    pub height_m: f64,
    pub max_indoor_depth_m: f64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            urban_share: 0.4,
            indoor_ratio: 0.8,
            antenna_gain_dbi: 0.0,
            height_m: 1.5,
            max_indoor_depth_m: 25.0,
        }
    }
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("urban_share", self.urban_share),
            ("indoor_ratio", self.indoor_ratio),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{v} outside [0, 1]"),
                });
            }
        }
        if self.height_m < 0.0 || self.max_indoor_depth_m < 0.0 {
            return Err(Error::InvalidParameter {
                name: "population",
                reason: "heights and depths must be nonnegative".into(),
            });
        }
        Ok(())
    }
}

/// Hexagonal lattice points inside a centred `hx` x `hy` half-extent box,
/// anchored at the box centre, ordered by (row, column).
fn hex_lattice(half_x_m: f64, half_y_m: f64, isd_m: f64) -> Vec<(i64, i64, f64, f64)> {
    let dy = isd_m * 3f64.sqrt() / 2.0;
    let rows = (half_y_m / dy).floor() as i64 + 1;
    let cols = (half_x_m / isd_m).floor() as i64 + 1;
    let tol = 1e-9 * isd_m;
    let mut pts = Vec::new();
    for r in -rows..=rows {
        let y = r as f64 * dy;
        if y.abs() > half_y_m + tol {
            continue;
        }
        let shift = if r.rem_euclid(2) == 1 { isd_m / 2.0 } else { 0.0 };
        for c in -cols - 1..=cols {
            let x = c as f64 * isd_m + shift;
            if x.abs() <= half_x_m + tol {
                pts.push((r, c, x, y));
            }
        }
    }
    pts
}

/// Terrestrial sites on two hexagonal lattices: the urban core at the urban
/// ISD and the remaining area at the rural ISD. Urban sites come first; each
/// group is ordered by (row, column).
pub fn build_grid(area: &AreaSpec, site: &SiteParams) -> Result<Vec<Mbs>> {
    area.validate()?;
    let urban_extent = area.urban_x_km.min(area.urban_y_km) * 1e3;
    if area.urban_isd_m > urban_extent {
        return Err(Error::DegenerateGrid {
            region: "urban",
            isd_m: area.urban_isd_m,
            extent_m: urban_extent,
        });
    }
    let total_extent = area.side_x_km.min(area.side_y_km) * 1e3;
    if area.rural_isd_m > total_extent {
        return Err(Error::DegenerateGrid {
            region: "rural",
            isd_m: area.rural_isd_m,
            extent_m: total_extent,
        });
    }

    let mut out = Vec::new();
    let push = |x_m: f64, y_m: f64, zone: Zone, out: &mut Vec<Mbs>| {
        out.push(Mbs {
            id: out.len(),
            tier: Tier::Terrestrial,
            zone: Some(zone),
            x_km: x_m / 1e3,
            y_km: y_m / 1e3,
            z_km: site.height_m / 1e3,
            max_power_dbm: site.max_power_dbm,
            antenna_gain_dbi: site.antenna_gain_dbi,
            static_power_w: site.static_power_w,
            baseline_power_w: site.baseline_power_w,
            dynamic_w_per_mw: site.dynamic_w_per_mw,
        });
    };

    for (_, _, x, y) in hex_lattice(
        area.urban_x_km * 500.0,
        area.urban_y_km * 500.0,
        area.urban_isd_m,
    ) {
        push(x, y, Zone::Urban, &mut out);
    }
    for (_, _, x, y) in hex_lattice(
        area.side_x_km * 500.0,
        area.side_y_km * 500.0,
        area.rural_isd_m,
    ) {
        if !area.in_urban(x / 1e3, y / 1e3) {
            push(x, y, Zone::Rural, &mut out);
        }
    }
    Ok(out)
}

/// Splits `count` between urban and rural by largest remainder; ties go to
/// the urban zone.
pub fn zone_split(count: usize, urban_share: f64) -> (usize, usize) {
    let q_urban = count as f64 * urban_share;
    let q_rural = count as f64 - q_urban;
    let mut urban = q_urban.floor() as usize;
    let mut rural = q_rural.floor() as usize;
    while urban + rural < count {
        if q_urban - urban as f64 >= q_rural - rural as f64 {
            urban += 1;
        } else {
            rural += 1;
        }
    }
    (urban, rural)
}

/// Uniform UE placement per zone; indoor UEs are an exact `indoor_ratio`
/// share (rounded) chosen uniformly.
pub fn sample_ues(
    count: usize,
    area: &AreaSpec,
    population: &PopulationSpec,
    seed: u64,
) -> Result<Vec<Ue>> {
    if count == 0 {
        return Err(Error::InvalidParameter {
            name: "count",
            reason: "at least one UE is required".into(),
        });
    }
    area.validate()?;
    population.validate()?;
    let (n_urban, n_rural) = zone_split(count, population.urban_share);

    let mut place = rng::stream(seed, Stream::UePlacement, 0);
    let mut ues = Vec::with_capacity(count);
    let (ux, uy) = (area.urban_x_km / 2.0, area.urban_y_km / 2.0);
    let (sx, sy) = (area.side_x_km / 2.0, area.side_y_km / 2.0);
    for _ in 0..n_urban {
        let x = place.random_range(-ux..=ux);
        let y = place.random_range(-uy..=uy);
        ues.push((x, y, Zone::Urban));
    }
    for _ in 0..n_rural {
        loop {
            let x = place.random_range(-sx..=sx);
            let y = place.random_range(-sy..=sy);
            if !area.in_urban(x, y) {
                ues.push((x, y, Zone::Rural));
                break;
            }
        }
    }

    let n_indoor = (count as f64 * population.indoor_ratio).round() as usize;
    let mut indoor = vec![false; count];
    let mut pick = rng::stream(seed, Stream::UeIndoor, 0);
    for i in index::sample(&mut pick, count, n_indoor.min(count)) {
        indoor[i] = true;
    }
    let mut depth_rng = rng::stream(seed, Stream::UeIndoorDepth, 0);

    Ok(ues
        .into_iter()
        .enumerate()
        .map(|(id, (x, y, zone))| {
            let depth = if indoor[id] {
                let a: f64 = depth_rng.random::<f64>() * population.max_indoor_depth_m;
                let b: f64 = depth_rng.random::<f64>() * population.max_indoor_depth_m;
                a.min(b)
            } else {
                0.0
            };
            Ue {
                id,
                x_km: x,
                y_km: y,
                z_km: population.height_m / 1e3,
                indoor: indoor[id],
                indoor_depth_m: depth,
                zone,
                antenna_gain_dbi: population.antenna_gain_dbi,
            }
        })
        .collect())
}

/// Hourly UE counts over one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrafficProfile {
    pub counts: Vec<u32>,
}

impl TrafficProfile {
    /// Raised-cosine day curve with its minimum `k_min` at 05:00 and maximum
    /// `k_max` at 20:00.
    pub fn diurnal(k_min: u32, k_max: u32) -> Self {
        let (lo, hi) = (k_min as f64, k_max as f64);
        let counts = (0..24)
            .map(|h| {
                let h = h as f64;
                let shape = if (5.0..=20.0).contains(&h) {
                    (1.0 - (std::f64::consts::PI * (h - 5.0) / 15.0).cos()) / 2.0
                } else {
                    let since_peak = if h > 20.0 { h - 20.0 } else { h + 4.0 };
                    (1.0 + (std::f64::consts::PI * since_peak / 9.0).cos()) / 2.0
                };
                (lo + (hi - lo) * shape).round().max(1.0) as u32
            })
            .collect();
        TrafficProfile { counts }
    }

    pub fn validate(&self) -> Result<()> {
        if self.counts.len() != 24 {
            return Err(Error::InvalidParameter {
                name: "traffic_profile",
                reason: format!("expected 24 hourly counts, got {}", self.counts.len()),
            });
        }
        if self.counts.contains(&0) {
            return Err(Error::InvalidParameter {
                name: "traffic_profile",
                reason: "hourly counts must be at least 1".into(),
            });
        }
        Ok(())
    }

    pub fn min_count(&self) -> u32 {
        self.counts.iter().copied().min().unwrap_or(1)
    }

    pub fn argmin_hour(&self) -> usize {
        (0..self.counts.len())
            .min_by_key(|&h| (self.counts[h], h))
            .unwrap_or(0)
    }

    pub fn argmax_hour(&self) -> usize {
        (0..self.counts.len())
            .max_by_key(|&h| (self.counts[h], std::cmp::Reverse(h)))
            .unwrap_or(0)
    }
}

impl Default for TrafficProfile {
    fn default() -> Self {
        TrafficProfile::diurnal(400, 10_000)
    }
}

pub fn ue_count_at(hour: usize, profile: &TrafficProfile, scale: f64) -> Result<usize> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "scale",
            reason: format!("{scale} is not positive"),
        });
    }
    let base = profile
        .counts
        .get(hour)
        .ok_or_else(|| Error::InvalidParameter {
            name: "hour",
            reason: format!("{hour} outside 0..24"),
        })?;
    Ok(((*base as f64 * scale).round() as usize).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PositionLabel {
    P1,
    P2,
    P3,
}

impl PositionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PositionLabel::P1 => "P1",
            PositionLabel::P2 => "P2",
            PositionLabel::P3 => "P3",
        }
    }
}

impl std::str::FromStr for PositionLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "P1" => Ok(PositionLabel::P1),
            "P2" => Ok(PositionLabel::P2),
            "P3" => Ok(PositionLabel::P3),
            other => Err(Error::Config(format!("unknown satellite position `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatellitePosition {
    pub label: PositionLabel,
    /// Horizontal offset along x from the area centre, km.
    pub offset_km: f64,
    pub altitude_km: f64,
}

pub fn satellite_positions(altitude_km: f64, offset_km: f64) -> Result<[SatellitePosition; 3]> {
    if !(altitude_km > 0.0) {
        return Err(Error::InvalidParameter {
            name: "altitude_km",
            reason: format!("{altitude_km} is not positive"),
        });
    }
    let at = |label, offset_km| SatellitePosition {
        label,
        offset_km,
        altitude_km,
    };
    Ok([
        at(PositionLabel::P1, -offset_km),
        at(PositionLabel::P2, 0.0),
        at(PositionLabel::P3, offset_km),
    ])
}

/// One network snapshot: terrestrial sites, one serving satellite (last in
/// the MBS list) and the UE population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub hour: usize,
    pub seed: u64,
    pub area: AreaSpec,
    pub mbs: Vec<Mbs>,
    pub ues: Vec<Ue>,
    pub satellite: SatellitePosition,
}

impl Scenario {
    pub fn assemble(
        hour: usize,
        seed: u64,
        area: AreaSpec,
        mut terrestrial: Vec<Mbs>,
        satellite_site: &SiteParams,
        satellite: SatellitePosition,
        ues: Vec<Ue>,
    ) -> Self {
        let id = terrestrial.len();
        terrestrial.push(Mbs {
            id,
            tier: Tier::Satellite,
            zone: None,
            x_km: satellite.offset_km,
            y_km: 0.0,
            z_km: satellite.altitude_km,
            max_power_dbm: satellite_site.max_power_dbm,
            antenna_gain_dbi: satellite_site.antenna_gain_dbi,
            static_power_w: satellite_site.static_power_w,
            baseline_power_w: satellite_site.baseline_power_w,
            dynamic_w_per_mw: satellite_site.dynamic_w_per_mw,
        });
        Scenario {
            hour,
            seed,
            area,
            mbs: terrestrial,
            ues,
            satellite,
        }
    }

    pub fn num_ues(&self) -> usize {
        self.ues.len()
    }

    pub fn num_mbs(&self) -> usize {
        self.mbs.len()
    }

    pub fn tiers(&self) -> Vec<Tier> {
        self.mbs.iter().map(|m| m.tier).collect()
    }

    pub fn max_powers_mw(&self) -> Vec<f64> {
        self.mbs.iter().map(Mbs::max_power_mw).collect()
    }

    pub fn terrestrial_count(&self) -> usize {
        self.mbs.iter().filter(|m| m.tier == Tier::Terrestrial).count()
    }
}
