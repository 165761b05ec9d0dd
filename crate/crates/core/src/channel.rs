//! Large-scale channel gains for terrestrial and satellite links.
//!
//! Every term of a link budget is kept as a signed dB contribution: gains are
//! positive, losses negative, so the channel gain in dB is the plain sum of
//! the terms. Config files carry losses as positive magnitudes and the
//! budget negates them.
//!
//! Terrestrial links use UMa (urban sites) or RMa (rural sites) log-distance
//! path loss with 3GPP-style LoS probabilities, log-normal shadowing and the
//! low-loss O2I model for indoor UEs. Satellite links use free-space loss at
//! the slant range plus elevation-binned shadowing and clutter tables,
//! scintillation and a building entry loss for indoor UEs.

use std::io::Write;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::rng::{self, SimRng, Stream};
use crate::scenario::{Mbs, Scenario, Tier, Ue, Zone};
use crate::units::{db_to_linear, linear_to_db};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Elevation of `sat` seen from `ue`, degrees. Positions are (x, y, z) in km.
pub fn elevation_angle(sat: [f64; 3], ue: [f64; 3]) -> Result<f64> {
    let d = [sat[0] - ue[0], sat[1] - ue[1], sat[2] - ue[2]];
    let slant = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if slant == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    if d[2] <= 0.0 {
        return Err(Error::SatelliteBelowUe {
            sat_z_km: sat[2],
            ue_z_km: ue[2],
        });
    }
    Ok((d[2] / slant).asin().to_degrees())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerrestrialChannel {
    /// Forces the LoS probability of every terrestrial link when set.
    pub los_probability_override: Option<f64>,
    pub uma_sf_los_db: f64,
    pub uma_sf_nlos_db: f64,
    pub rma_sf_los_db: f64,
    pub rma_sf_los_far_db: f64,
    pub rma_sf_nlos_db: f64,
    pub rma_building_height_m: f64,
    pub rma_street_width_m: f64,
}

impl Default for TerrestrialChannel {
    fn default() -> Self {
        TerrestrialChannel {
            los_probability_override: None,
            uma_sf_los_db: 4.0,
            uma_sf_nlos_db: 6.0,
            rma_sf_los_db: 4.0,
            rma_sf_los_far_db: 6.0,
            rma_sf_nlos_db: 8.0,
            rma_building_height_m: 5.0,
            rma_street_width_m: 20.0,
        }
    }
}

/// Low-loss outdoor-to-indoor penetration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct O2iParams {
    /// Share of glass in the external wall; the rest is concrete.
    pub glass_fraction: f64,
    pub inside_loss_db_per_m: f64,
    pub penetration_sigma_db: f64,
}

impl Default for O2iParams {
    fn default() -> Self {
        O2iParams {
            glass_fraction: 0.3,
            inside_loss_db_per_m: 0.5,
            penetration_sigma_db: 4.4,
        }
    }
}

impl O2iParams {
    /// Through-wall loss (positive dB) at `fc_ghz`.
    pub fn wall_loss_db(&self, fc_ghz: f64) -> f64 {
        let glass = 2.0 + 0.2 * fc_ghz;
        let concrete = 5.0 + 4.0 * fc_ghz;
        5.0 - 10.0
            * (self.glass_fraction * db_to_linear(-glass)
                + (1.0 - self.glass_fraction) * db_to_linear(-concrete))
            .log10()
    }
}

/// Elevation-binned satellite tables. Bin `b` covers elevations rounded to
/// `10 * (b + 1)` degrees; values are positive magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SatelliteChannel {
    pub los_probability_override: Option<f64>,
    pub los_probability: Vec<f64>,
    pub sf_los_db: Vec<f64>,
    pub sf_nlos_db: Vec<f64>,
    pub clutter_loss_los_db: f64,
    pub clutter_loss_nlos_db: Vec<f64>,
    pub scintillation_loss_db: f64,
    pub building_entry_loss_db: f64,
}

impl Default for SatelliteChannel {
    fn default() -> Self {
        SatelliteChannel {
            los_probability_override: None,
            los_probability: vec![0.246, 0.386, 0.493, 0.613, 0.726, 0.805, 0.919, 0.968, 0.992],
            sf_los_db: vec![4.0; 9],
            sf_nlos_db: vec![6.0; 9],
            clutter_loss_los_db: 0.0,
            clutter_loss_nlos_db: vec![34.3, 30.9, 29.0, 27.7, 26.8, 26.2, 25.8, 25.5, 25.5],
            scintillation_loss_db: 2.2,
            building_entry_loss_db: 10.0,
        }
    }
}

impl SatelliteChannel {
    pub fn bin(elevation_deg: f64) -> usize {
        ((elevation_deg / 10.0).round() as i64).clamp(1, 9) as usize - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    pub carrier_ghz: f64,
    pub terrestrial: TerrestrialChannel,
    pub o2i: O2iParams,
    pub satellite: SatelliteChannel,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            carrier_ghz: 2.0,
            terrestrial: TerrestrialChannel::default(),
            o2i: O2iParams::default(),
            satellite: SatelliteChannel::default(),
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: &str| Error::InvalidParameter {
            name,
            reason: reason.to_string(),
        };
        if !(self.carrier_ghz > 0.0) {
            return Err(bad("carrier_ghz", "must be positive"));
        }
        let t = &self.terrestrial;
        if [
            t.uma_sf_los_db,
            t.uma_sf_nlos_db,
            t.rma_sf_los_db,
            t.rma_sf_los_far_db,
            t.rma_sf_nlos_db,
            self.o2i.penetration_sigma_db,
        ]
        .iter()
        .any(|s| *s < 0.0)
        {
            return Err(bad("shadowing", "standard deviations must be nonnegative"));
        }
        let s = &self.satellite;
        for (name, table) in [
            ("satellite.los_probability", &s.los_probability),
            ("satellite.sf_los_db", &s.sf_los_db),
            ("satellite.sf_nlos_db", &s.sf_nlos_db),
            ("satellite.clutter_loss_nlos_db", &s.clutter_loss_nlos_db),
        ] {
            if table.len() != 9 {
                return Err(bad(name, "needs one value per 10-degree bin (9)"));
            }
            if table.iter().any(|v| *v < 0.0) {
                return Err(bad(name, "values must be nonnegative"));
            }
        }
        for p in s
            .los_probability
            .iter()
            .chain(s.los_probability_override.iter())
            .chain(t.los_probability_override.iter())
        {
            if !(0.0..=1.0).contains(p) {
                return Err(bad("los_probability", "must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConditions {
    pub los: bool,
    /// Satellite links only.
    pub elevation_deg: Option<f64>,
    pub d2d_m: f64,
    pub d3d_m: f64,
}

/// Standard-normal draws used by one link.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinkDraws {
    pub los_uniform: f64,
    pub shadow_z: f64,
    pub penetration_z: f64,
}

impl LinkDraws {
    /// Always consumes the same three values, so toggling a UE's indoor flag
    /// or LoS state never shifts any other draw.
    pub fn sample(rng: &mut SimRng) -> Self {
        LinkDraws {
            los_uniform: rng.random::<f64>(),
            shadow_z: rng.sample(StandardNormal),
            penetration_z: rng.sample(StandardNormal),
        }
    }

    /// Draws pinned to their means: LoS decided by `los`, no shadowing.
    pub fn mean(los: bool) -> Self {
        LinkDraws {
            los_uniform: if los { 0.0 } else { 1.0 },
            shadow_z: 0.0,
            penetration_z: 0.0,
        }
    }
}

/// Signed dB contributions of one link.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinkBudget {
    pub tx_gain_db: f64,
    pub ue_gain_db: f64,
    pub basic_path_loss_db: f64,
    pub shadowing_db: f64,
    pub wall_loss_db: f64,
    pub inside_loss_db: f64,
    pub penetration_db: f64,
    pub clutter_loss_db: f64,
    pub scintillation_db: f64,
    pub entry_loss_db: f64,
}

impl LinkBudget {
    pub fn gain_db(&self) -> f64 {
        self.tx_gain_db
            + self.ue_gain_db
            + self.basic_path_loss_db
            + self.shadowing_db
            + self.wall_loss_db
            + self.inside_loss_db
            + self.penetration_db
            + self.clutter_loss_db
            + self.scintillation_db
            + self.entry_loss_db
    }

    pub fn gain_linear(&self) -> f64 {
        db_to_linear(self.gain_db())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    Uma,
    Rma,
    Satellite,
}

impl LinkKind {
    pub fn of(mbs: &Mbs) -> Self {
        match (mbs.tier, mbs.zone) {
            (Tier::Satellite, _) => LinkKind::Satellite,
            (Tier::Terrestrial, Some(Zone::Urban)) => LinkKind::Uma,
            (Tier::Terrestrial, _) => LinkKind::Rma,
        }
    }
}

/// LoS probability of a terrestrial link at 2D distance `d2d_m`, or of a
/// satellite link at `elevation_deg`.
pub fn los_probability(kind: LinkKind, geometry: f64, params: &ChannelParams) -> f64 {
    match kind {
        LinkKind::Satellite => params
            .satellite
            .los_probability_override
            .unwrap_or_else(|| params.satellite.los_probability[SatelliteChannel::bin(geometry)]),
        LinkKind::Uma => params.terrestrial.los_probability_override.unwrap_or_else(|| {
            let d = geometry;
            if d <= 18.0 {
                1.0
            } else {
                18.0 / d + (-d / 63.0).exp() * (1.0 - 18.0 / d)
            }
        }),
        LinkKind::Rma => params.terrestrial.los_probability_override.unwrap_or_else(|| {
            let d = geometry;
            if d <= 10.0 {
                1.0
            } else {
                (-(d - 10.0) / 1000.0).exp()
            }
        }),
    }
}

pub fn sample_los(kind: LinkKind, geometry: f64, params: &ChannelParams, rng: &mut SimRng) -> bool {
    rng.random::<f64>() < los_probability(kind, geometry, params)
}

fn log10(x: f64) -> f64 {
    x.log10()
}

/// UMa basic path loss (positive dB) and shadowing sigma.
fn uma_path_loss(d2d: f64, d3d: f64, h_bs: f64, h_ut: f64, fc: f64, los: bool, t: &TerrestrialChannel) -> (f64, f64) {
    let d_bp = 4.0 * (h_bs - 1.0) * (h_ut - 1.0).max(0.01) * fc * 1e9 / SPEED_OF_LIGHT;
    let pl_los = if d2d <= d_bp {
        28.0 + 22.0 * log10(d3d) + 20.0 * log10(fc)
    } else {
        28.0 + 40.0 * log10(d3d) + 20.0 * log10(fc)
            - 9.0 * log10(d_bp * d_bp + (h_bs - h_ut).powi(2))
    };
    if los {
        (pl_los, t.uma_sf_los_db)
    } else {
        let pl_nlos = 13.54 + 39.08 * log10(d3d) + 20.0 * log10(fc) - 0.6 * (h_ut - 1.5);
        (pl_los.max(pl_nlos), t.uma_sf_nlos_db)
    }
}

/// RMa basic path loss (positive dB) and shadowing sigma.
fn rma_path_loss(d2d: f64, d3d: f64, h_bs: f64, h_ut: f64, fc: f64, los: bool, t: &TerrestrialChannel) -> (f64, f64) {
    let h = t.rma_building_height_m;
    let w = t.rma_street_width_m;
    let d_bp = 2.0 * std::f64::consts::PI * h_bs * h_ut * fc * 1e9 / SPEED_OF_LIGHT;
    let pl1 = |d: f64| {
        20.0 * log10(40.0 * std::f64::consts::PI * d * fc / 3.0)
            + (0.03 * h.powf(1.72)).min(10.0) * log10(d)
            - (0.044 * h.powf(1.72)).min(14.77)
            + 0.002 * log10(h) * d
    };
    let (pl_los, sf_los) = if d2d <= d_bp {
        (pl1(d3d), t.rma_sf_los_db)
    } else {
        (pl1(d_bp) + 40.0 * log10(d3d / d_bp), t.rma_sf_los_far_db)
    };
    if los {
        (pl_los, sf_los)
    } else {
        let pl_nlos = 161.04 - 7.1 * log10(w) + 7.5 * log10(h)
            - (24.37 - 3.7 * (h / h_bs).powi(2)) * log10(h_bs)
            + (43.42 - 3.1 * log10(h_bs)) * (log10(d3d) - 3.0)
            + 20.0 * log10(fc)
            - (3.2 * log10(11.75 * h_ut).powi(2) - 4.97);
        (pl_los.max(pl_nlos), t.rma_sf_nlos_db)
    }
}

/// Free-space path loss (positive dB) at `d_m` metres.
pub fn free_space_path_loss_db(d_m: f64, fc_ghz: f64) -> f64 {
    32.45 + 20.0 * log10(fc_ghz) + 20.0 * log10(d_m)
}

fn o2i_terms(ue: &Ue, params: &ChannelParams, draws: &LinkDraws) -> (f64, f64, f64) {
    if !ue.indoor {
        return (0.0, 0.0, 0.0);
    }
    (
        -params.o2i.wall_loss_db(params.carrier_ghz),
        -params.o2i.inside_loss_db_per_m * ue.indoor_depth_m,
        params.o2i.penetration_sigma_db * draws.penetration_z,
    )
}

pub fn link_conditions(mbs: &Mbs, ue: &Ue, los: bool) -> Result<LinkConditions> {
    let dx = (mbs.x_km - ue.x_km) * 1e3;
    let dy = (mbs.y_km - ue.y_km) * 1e3;
    let dz = (mbs.z_km - ue.z_km) * 1e3;
    let d2d = (dx * dx + dy * dy).sqrt();
    let d3d = (d2d * d2d + dz * dz).sqrt();
    let elevation_deg = if mbs.is_satellite() {
        Some(elevation_angle(
            [mbs.x_km, mbs.y_km, mbs.z_km],
            [ue.x_km, ue.y_km, ue.z_km],
        )?)
    } else {
        None
    };
    Ok(LinkConditions {
        los,
        elevation_deg,
        d2d_m: d2d,
        d3d_m: d3d,
    })
}

pub fn terrestrial_budget(mbs: &Mbs, ue: &Ue, cond: &LinkConditions, params: &ChannelParams, draws: &LinkDraws) -> LinkBudget {
    let fc = params.carrier_ghz;
    let h_bs = mbs.z_km * 1e3;
    let h_ut = ue.z_km * 1e3;
    let d2d = cond.d2d_m.max(10.0);
    let d3d = (d2d * d2d + (h_bs - h_ut).powi(2)).sqrt();
    let (pl, sigma) = match LinkKind::of(mbs) {
        LinkKind::Uma => uma_path_loss(d2d, d3d, h_bs, h_ut, fc, cond.los, &params.terrestrial),
        _ => rma_path_loss(d2d, d3d, h_bs, h_ut, fc, cond.los, &params.terrestrial),
    };
    let (wall, inside, pen) = o2i_terms(ue, params, draws);
    LinkBudget {
        tx_gain_db: mbs.antenna_gain_dbi,
        ue_gain_db: ue.antenna_gain_dbi,
        basic_path_loss_db: -pl,
        shadowing_db: sigma * draws.shadow_z,
        wall_loss_db: wall,
        inside_loss_db: inside,
        penetration_db: pen,
        ..LinkBudget::default()
    }
}

pub fn satellite_budget(mbs: &Mbs, ue: &Ue, cond: &LinkConditions, params: &ChannelParams, draws: &LinkDraws) -> LinkBudget {
    let s = &params.satellite;
    let elevation = cond.elevation_deg.unwrap_or(90.0);
    let bin = SatelliteChannel::bin(elevation);
    let (sigma, clutter) = if cond.los {
        (s.sf_los_db[bin], s.clutter_loss_los_db)
    } else {
        (s.sf_nlos_db[bin], s.clutter_loss_nlos_db[bin])
    };
    LinkBudget {
        tx_gain_db: mbs.antenna_gain_dbi,
        ue_gain_db: ue.antenna_gain_dbi,
        basic_path_loss_db: -free_space_path_loss_db(cond.d3d_m, params.carrier_ghz),
        shadowing_db: sigma * draws.shadow_z,
        clutter_loss_db: -clutter,
        scintillation_db: -s.scintillation_loss_db,
        entry_loss_db: if ue.indoor { -s.building_entry_loss_db } else { 0.0 },
        ..LinkBudget::default()
    }
}

/// Linear gain of a terrestrial link; draws shadowing and penetration from `rng`.
pub fn terrestrial_gain(mbs: &Mbs, ue: &Ue, cond: &LinkConditions, params: &ChannelParams, rng: &mut SimRng) -> f64 {
    let draws = LinkDraws::sample(rng);
    terrestrial_budget(mbs, ue, cond, params, &draws).gain_linear()
}

pub fn satellite_gain(mbs: &Mbs, ue: &Ue, cond: &LinkConditions, params: &ChannelParams, rng: &mut SimRng) -> f64 {
    let draws = LinkDraws::sample(rng);
    satellite_budget(mbs, ue, cond, params, &draws).gain_linear()
}

/// Samples LoS and evaluates one link from its pre-drawn randomness.
pub fn evaluate_link(mbs: &Mbs, ue: &Ue, params: &ChannelParams, draws: &LinkDraws) -> Result<(f64, bool)> {
    let kind = LinkKind::of(mbs);
    let geom = link_conditions(mbs, ue, false)?;
    let g = match kind {
        LinkKind::Satellite => geom.elevation_deg.unwrap_or(90.0),
        _ => geom.d2d_m,
    };
    let los = draws.los_uniform < los_probability(kind, g, params);
    let cond = LinkConditions { los, ..geom };
    let budget = match kind {
        LinkKind::Satellite => satellite_budget(mbs, ue, &cond, params, draws),
        _ => terrestrial_budget(mbs, ue, &cond, params, draws),
    };
    Ok((budget.gain_linear(), los))
}

/// RSRP in dBm for a linear gain and a per-RE transmit power in mW.
pub fn rsrp_dbm(beta: f64, p_mw: f64) -> f64 {
    linear_to_db(beta * p_mw)
}

/// Frozen per-snapshot channel: linear gains (K x L) and LoS flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub gain: Array2<f64>,
    pub los: Array2<bool>,
    pub tiers: Vec<Tier>,
    pub max_power_mw: Vec<f64>,
    pub ue_ids: Vec<usize>,
    pub mbs_ids: Vec<usize>,
}

fn link_stream_index(ue: usize, mbs: usize) -> u64 {
    ((ue as u64) << 24) | (mbs as u64 & 0xFF_FFFF)
}

impl ChannelState {
    /// Builds the gain matrix, one parallel work item per UE. Each link owns
    /// a ChaCha stream keyed by (UE id, MBS id), so the result does not depend
    /// on the execution mode.
    pub fn build(scenario: &Scenario, params: &ChannelParams, seed: u64, exec: Execution) -> Result<Self> {
        params.validate()?;
        let k = scenario.ues.len();
        let l = scenario.mbs.len();
        let rows: Vec<Result<Vec<(f64, bool)>>> = par::map_range(exec, k, |i| {
            let ue = &scenario.ues[i];
            scenario
                .mbs
                .iter()
                .map(|mbs| {
                    let mut rng = rng::stream(seed, Stream::Link, link_stream_index(ue.id, mbs.id));
                    let draws = LinkDraws::sample(&mut rng);
                    evaluate_link(mbs, ue, params, &draws)
                })
                .collect()
        });
        let mut gain = Array2::zeros((k, l));
        let mut los = Array2::from_elem((k, l), false);
        for (i, row) in rows.into_iter().enumerate() {
            for (j, (g, l)) in row?.into_iter().enumerate() {
                gain[[i, j]] = g;
                los[[i, j]] = l;
            }
        }
        Ok(ChannelState {
            gain,
            los,
            tiers: scenario.tiers(),
            max_power_mw: scenario.max_powers_mw(),
            ue_ids: scenario.ues.iter().map(|u| u.id).collect(),
            mbs_ids: scenario.mbs.iter().map(|m| m.id).collect(),
        })
    }

    /// Direct construction, mainly for small hand-built instances.
    pub fn from_gains(gain: Array2<f64>, tiers: Vec<Tier>, max_power_mw: Vec<f64>) -> Result<Self> {
        let (k, l) = gain.dim();
        if tiers.len() != l || max_power_mw.len() != l {
            return Err(Error::Dimension(format!(
                "gain is {k}x{l} but {} tiers and {} power limits",
                tiers.len(),
                max_power_mw.len()
            )));
        }
        if gain.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "gain",
                reason: "gains must be positive and finite".into(),
            });
        }
        Ok(ChannelState {
            los: Array2::from_elem((k, l), false),
            gain,
            tiers,
            max_power_mw,
            ue_ids: (0..k).collect(),
            mbs_ids: (0..l).collect(),
        })
    }

    /// Sub-network with only the listed UE rows.
    pub fn select_ues(&self, rows: &[usize]) -> ChannelState {
        ChannelState {
            gain: self.gain.select(ndarray::Axis(0), rows),
            los: self.los.select(ndarray::Axis(0), rows),
            tiers: self.tiers.clone(),
            max_power_mw: self.max_power_mw.clone(),
            ue_ids: rows.iter().map(|&i| self.ue_ids[i]).collect(),
            mbs_ids: self.mbs_ids.clone(),
        }
    }

    pub fn num_ues(&self) -> usize {
        self.gain.nrows()
    }

    pub fn num_mbs(&self) -> usize {
        self.gain.ncols()
    }

    pub fn is_satellite(&self, j: usize) -> bool {
        self.tiers[j] == Tier::Satellite
    }

    /// Linear RSRP (mW) of UE `i` from MBS `j` at power `p_mw`.
    pub fn rsrp_mw(&self, i: usize, j: usize, p_mw: f64) -> f64 {
        self.gain[[i, j]] * p_mw
    }

    /// Whether MBS `j` can reach `rsrp_min_mw` at UE `i` at full power.
    pub fn can_cover(&self, i: usize, j: usize, rsrp_min_mw: f64) -> bool {
        self.gain[[i, j]] * self.max_power_mw[j] >= rsrp_min_mw
    }

    /// Writes the gain matrix in dB: one row per UE, one column per MBS.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["ue".to_string()];
        header.extend(self.mbs_ids.iter().map(|j| format!("mbs_{j}")));
        w.write_record(&header)?;
        for (i, row) in self.gain.rows().into_iter().enumerate() {
            let mut rec = vec![self.ue_ids[i].to_string()];
            rec.extend(row.iter().map(|g| format!("{:.6}", linear_to_db(*g))));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<channel csv>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{self, AreaSpec, PopulationSpec, SiteParams};
    use approx::assert_relative_eq;

    fn ue(indoor: bool) -> Ue {
        Ue {
            id: 0,
            x_km: 0.0,
            y_km: 0.0,
            z_km: 0.0015,
            indoor,
            indoor_depth_m: if indoor { 10.0 } else { 0.0 },
            zone: Zone::Rural,
            antenna_gain_dbi: 0.0,
        }
    }

    fn site(tier: Tier, x_km: f64, z_km: f64) -> Mbs {
        let p = match tier {
            Tier::Terrestrial => SiteParams::terrestrial_default(),
            Tier::Satellite => SiteParams::satellite_default(),
        };
        Mbs {
            id: 0,
            tier,
            zone: if tier == Tier::Terrestrial { Some(Zone::Rural) } else { None },
            x_km,
            y_km: 0.0,
            z_km,
            max_power_dbm: p.max_power_dbm,
            antenna_gain_dbi: p.antenna_gain_dbi,
            static_power_w: p.static_power_w,
            baseline_power_w: p.baseline_power_w,
            dynamic_w_per_mw: p.dynamic_w_per_mw,
        }
    }

    #[test]
    fn elevation_examples() {
        assert_relative_eq!(elevation_angle([0.0, 0.0, 600.0], [0.0, 0.0, 0.0]).unwrap(), 90.0);
        assert_relative_eq!(elevation_angle([600.0, 0.0, 600.0], [0.0, 0.0, 0.0]).unwrap(), 45.0, epsilon = 1e-12);
        let p1 = elevation_angle([50.0, 0.0, 600.0], [0.0, 0.0, 0.0]).unwrap();
        let oracle = (600.0f64 / (600.0f64.powi(2) + 50.0f64.powi(2)).sqrt()).asin().to_degrees();
        assert_relative_eq!(p1, oracle, epsilon = 1e-12);
        assert!((p1 - 85.24).abs() < 0.005);
        assert!(matches!(elevation_angle([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]), Err(Error::CoincidentPoints)));
        assert!(elevation_angle([0.0, 0.0, 0.0], [0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn zero_budget_is_unit_gain() {
        let b = LinkBudget::default();
        assert_eq!(b.gain_linear(), 1.0);
    }

    #[test]
    fn budget_terms_have_loss_signs() {
        let params = ChannelParams::default();
        let mbs = site(Tier::Terrestrial, 1.0, 0.025);
        let u = ue(true);
        let cond = link_conditions(&mbs, &u, false).unwrap();
        let b = terrestrial_budget(&mbs, &u, &cond, &params, &LinkDraws::mean(false));
        assert!(b.basic_path_loss_db < 0.0);
        assert!(b.wall_loss_db < 0.0);
        assert!(b.inside_loss_db < 0.0);
        let sum = b.tx_gain_db + b.ue_gain_db + b.basic_path_loss_db + b.shadowing_db + b.wall_loss_db + b.inside_loss_db + b.penetration_db;
        assert_eq!(sum, b.gain_db());
    }

    #[test]
    fn outdoor_ue_skips_o2i() {
        let params = ChannelParams::default();
        let mbs = site(Tier::Terrestrial, 1.0, 0.025);
        let draws = LinkDraws {
            los_uniform: 0.5,
            shadow_z: 0.3,
            penetration_z: 1.7,
        };
        let out = ue(false);
        let cond = link_conditions(&mbs, &out, true).unwrap();
        let b = terrestrial_budget(&mbs, &out, &cond, &params, &draws);
        assert_eq!((b.wall_loss_db, b.inside_loss_db, b.penetration_db), (0.0, 0.0, 0.0));

        let inside = ue(true);
        let bi = terrestrial_budget(&mbs, &inside, &cond, &params, &draws);
        // only the O2I terms move
        assert_eq!(bi.basic_path_loss_db, b.basic_path_loss_db);
        assert_eq!(bi.shadowing_db, b.shadowing_db);
        let o2i = bi.wall_loss_db + bi.inside_loss_db + bi.penetration_db;
        assert_relative_eq!(bi.gain_db() - b.gain_db(), o2i, epsilon = 1e-12);
    }

    #[test]
    fn satellite_nadir_free_space() {
        let params = ChannelParams::default();
        let mbs = site(Tier::Satellite, 0.0, 600.0);
        let mut u = ue(false);
        u.z_km = 0.0;
        let cond = link_conditions(&mbs, &u, true).unwrap();
        assert_relative_eq!(cond.elevation_deg.unwrap(), 90.0);
        let mut p = params.clone();
        p.satellite.scintillation_loss_db = 0.0;
        let b = satellite_budget(&mbs, &u, &cond, &p, &LinkDraws::mean(true));
        // FSPL at 2 GHz over 600 km, by hand: 20log10(4 pi d f / c)
        let fspl = 20.0 * (4.0 * std::f64::consts::PI * 600e3 * 2e9 / SPEED_OF_LIGHT).log10();
        assert!((free_space_path_loss_db(600e3, 2.0) - fspl).abs() < 0.01);
        assert_relative_eq!(b.gain_db(), 30.0 + 0.0 - free_space_path_loss_db(600e3, 2.0), epsilon = 1e-12);

        let indoor = ue(true);
        let ci = link_conditions(&mbs, &indoor, true).unwrap();
        let bi = satellite_budget(&mbs, &indoor, &ci, &p, &LinkDraws::mean(true));
        assert_eq!(bi.entry_loss_db, -p.satellite.building_entry_loss_db);
        assert_eq!(b.entry_loss_db, 0.0);
    }

    #[test]
    fn satellite_gain_monotone_in_elevation() {
        let params = ChannelParams::default();
        let u = ue(false);
        for los in [true, false] {
            let mut last = f64::NEG_INFINITY;
            // move the satellite towards nadir: elevation rises
            for off in (0..=60).rev().map(|k| k as f64 * 10.0) {
                let mbs = site(Tier::Satellite, off, 600.0);
                let cond = link_conditions(&mbs, &u, los).unwrap();
                let g = satellite_budget(&mbs, &u, &cond, &params, &LinkDraws::mean(los)).gain_db();
                assert!(g >= last - 1e-12, "offset {off}");
                last = g;
            }
        }
    }

    #[test]
    fn los_sampling() {
        let mut params = ChannelParams::default();
        params.terrestrial.los_probability_override = Some(1.0);
        let mut rng = rng::stream(1, Stream::Link, 0);
        assert!((0..1000).all(|_| sample_los(LinkKind::Rma, 5000.0, &params, &mut rng)));

        let params = ChannelParams::default();
        let mut sat = params.clone();
        sat.satellite.los_probability[8] = 1.0;
        assert!((0..1000).all(|_| sample_los(LinkKind::Satellite, 88.0, &sat, &mut rng)));

        // Monte Carlo frequency against the configured curve
        let target = los_probability(LinkKind::Uma, 60.0, &params);
        let n = 100_000;
        let hits = (0..n).filter(|_| sample_los(LinkKind::Uma, 60.0, &params, &mut rng)).count();
        assert!((hits as f64 / n as f64 - target).abs() < 0.01);
    }

    #[test]
    fn rsrp_examples() {
        assert_eq!(rsrp_dbm(1.0, 1.0), 0.0);
        let v = rsrp_dbm(1e-12, crate::units::dbm_to_mw(17.7));
        assert!((v - (-102.3)).abs() < 1e-9);
    }

    #[test]
    fn wall_loss_at_two_ghz() {
        // 5 - 10log10(0.3*10^-0.24 + 0.7*10^-1.3)
        let expect = 5.0 - 10.0 * (0.3 * 10f64.powf(-0.24) + 0.7 * 10f64.powf(-1.3)).log10();
        assert_relative_eq!(O2iParams::default().wall_loss_db(2.0), expect, epsilon = 1e-12);
    }

    fn small_scenario() -> Scenario {
        let area = AreaSpec::desk();
        let grid = scenario::build_grid(&area, &SiteParams::terrestrial_default()).unwrap();
        let ues = scenario::sample_ues(30, &area, &PopulationSpec::default(), 3).unwrap();
        let pos = scenario::satellite_positions(600.0, 50.0).unwrap();
        Scenario::assemble(5, 3, area, grid, &SiteParams::satellite_default(), pos[1], ues)
    }

    #[test]
    fn build_is_deterministic_across_modes() {
        let sc = small_scenario();
        let params = ChannelParams::default();
        let a = ChannelState::build(&sc, &params, 9, Execution::Parallel).unwrap();
        let b = ChannelState::build(&sc, &params, 9, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert!(a.gain.iter().all(|g| g.is_finite() && *g > 0.0));
        assert_eq!(a.gain.dim(), (30, 20));
    }

    #[test]
    fn nadir_beats_offset_positions_at_mean_draws() {
        let sc = small_scenario();
        let params = ChannelParams::default();
        let [p1, p2, p3] = scenario::satellite_positions(600.0, 50.0).unwrap();
        for u in &sc.ues {
            let gain_at = |pos: scenario::SatellitePosition| {
                let mut m = sc.mbs.last().unwrap().clone();
                m.x_km = pos.offset_km;
                let cond = link_conditions(&m, u, true).unwrap();
                satellite_budget(&m, u, &cond, &params, &LinkDraws::mean(true)).gain_db()
            };
            let g2 = gain_at(p2);
            assert!(g2 >= gain_at(p1) && g2 >= gain_at(p3));
        }
    }

    #[test]
    fn csv_dump_shape() {
        let ch = ChannelState::from_gains(
            ndarray::array![[1e-10, 1e-12], [1.0, 0.5]],
            vec![Tier::Terrestrial, Tier::Satellite],
            vec![1.0, 1.0],
        )
        .unwrap();
        let mut buf = Vec::new();
        ch.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "ue,mbs_0,mbs_1");
        assert_eq!(lines[1], "0,-100.000000,-120.000000");
        assert_eq!(lines[2], "1,0.000000,-3.010300");
    }
}
