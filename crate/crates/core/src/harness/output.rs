use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use super::metrics::{DailySummary, HourlyMetrics};
use super::{PlanResult, RunPlan, RunRecord};
use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::scenario::{self, Scenario};

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn write_hourly<W: Write>(rows: &[HourlyMetrics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HourlyMetrics::HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush().map_err(|e| Error::io("hourly metrics", e))
}

pub fn write_summary<W: Write>(rows: &[DailySummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DailySummary::HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush().map_err(|e| Error::io("daily summary", e))
}

/// `traces/<policy>_h<hour>_s<seed>_<position>[_lmax<λ>].csv`
pub fn trace_file_name(r: &RunRecord) -> String {
    let mut name = format!("{}_h{:02}_s{}_{}", r.policy, r.hour, r.seed, r.position.as_str());
    if r.policy.uses_lambda() {
        name.push_str(&format!("_lmax{}", sig9(r.lambda_max)));
    }
    name.push_str(".csv");
    name
}

pub fn write_all(plan: &RunPlan, result: &PlanResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files = Vec::new();

    let hourly = out_dir.join("hourly_metrics.csv");
    write_hourly(&result.hourly, create(&hourly)?)?;
    files.push(hourly);

    let summary = out_dir.join("daily_summary.csv");
    write_summary(&result.summary, create(&summary)?)?;
    files.push(summary);

    if plan.config.plan.write_traces {
        let dir = out_dir.join("traces");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for r in &result.records {
            let Some(trace) = &r.trace else { continue };
            if !plan.policies().contains(&r.policy) || (!r.policy.uses_lambda() && r.lambda_index != 0) {
                continue;
            }
            let path = dir.join(trace_file_name(r));
            trace.write_csv(create(&path)?)?;
            files.push(path);
        }
    }

    let manifest = out_dir.join("run_manifest.json");
    let cfg = &plan.config;
    let ue_counts: Vec<serde_json::Value> = cfg
        .plan
        .hours
        .iter()
        .map(|&h| Ok(json!({ "hour": h, "k": scenario::ue_count_at(h, &cfg.traffic.profile, cfg.traffic.scale)? })))
        .collect::<Result<_>>()?;
    let rel: Vec<String> = files
        .iter()
        .map(|p| p.strip_prefix(out_dir).unwrap_or(p).to_string_lossy().replace('\\', "/"))
        .collect();
    let doc = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "seeds": cfg.plan.seeds,
        "hours": cfg.plan.hours,
        "policies": cfg.plan.policies,
        "lambda_max": cfg.plan.lambda_max,
        "k_min": result.k_min,
        "ue_counts": ue_counts,
        "outage_rate_bps": crate::benchmarks::OUTAGE_RATE_BPS,
        "runs": result.records.len(),
        "files": rel,
    });
    let mut w = create(&manifest)?;
    serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| Error::Config(e.to_string()))?;
    w.write_all(b"\n").map_err(|e| Error::io(&manifest, e))?;
    w.flush().map_err(|e| Error::io(&manifest, e))?;
    files.push(manifest);
    Ok(files)
}

/// One row per MBS and per UE.
pub fn write_scenario<W: Write>(sc: &Scenario, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "id", "tier", "zone", "x_km", "y_km", "z_km", "indoor", "indoor_depth_m", "max_power_dbm"])?;
    for m in &sc.mbs {
        w.write_record([
            "mbs".to_string(),
            m.id.to_string(),
            format!("{:?}", m.tier).to_lowercase(),
            m.zone.map_or(String::new(), |z| z.as_str().to_string()),
            sig9(m.x_km),
            sig9(m.y_km),
            sig9(m.z_km),
            String::new(),
            String::new(),
            sig9(m.max_power_dbm),
        ])?;
    }
    for u in &sc.ues {
        w.write_record([
            "ue".to_string(),
            u.id.to_string(),
            String::new(),
            u.zone.as_str().to_string(),
            sig9(u.x_km),
            sig9(u.y_km),
            sig9(u.z_km),
            u.indoor.to_string(),
            sig9(u.indoor_depth_m),
            String::new(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("scenario dump", e))
}
