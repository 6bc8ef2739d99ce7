//! Parameter sweeps: one run per value of a dotted config path, seeds
//! derived deterministically, results in one long-format CSV.

use std::path::Path;

use anyhow::{bail, Context, Result};

use uvtdma_core::rng::derive_seed;
use uvtdma_core::sim::{run_with_options, RunMetrics};

use crate::config;
use crate::report::SWEEP_COLUMNS;

pub struct SweepPoint {
    pub value: String,
    pub seed: u64,
    pub metrics: RunMetrics,
}

fn parse_value(raw: &str) -> Result<toml::Value> {
    if raw.is_empty() {
        bail!("empty sweep value");
    }
    if let Ok(i) = raw.parse::<i64>() {
        return Ok(toml::Value::Integer(i));
    }
    if let Ok(f) = raw.parse::<f64>() {
        return Ok(toml::Value::Float(f));
    }
    if let Ok(b) = raw.parse::<bool>() {
        return Ok(toml::Value::Boolean(b));
    }
    Ok(toml::Value::String(raw.to_string()))
}

/// Run the sweep. The parameter is a dotted path into the config
/// (`slots.guard_symbols`, `channel.lambda_s_per_symbol`, …); a path that
/// does not exist in the config is an error.
pub fn run_sweep(
    base: &toml::Table,
    param: &str,
    values: &[String],
    seed_base: u64,
    force: bool,
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        bail!("empty sweep value list");
    }
    let path: Vec<&str> = param.split('.').collect();
    let mut points = Vec::with_capacity(values.len());
    for (idx, raw) in values.iter().enumerate() {
        let mut table = base.clone();
        config::set_path(&mut table, &path, parse_value(raw)?, false)
            .with_context(|| format!("sweep parameter `{param}`"))?;
        let cfg = config::from_table(table)?;
        let mut scenario = cfg.to_scenario()?;
        scenario.seed = derive_seed(seed_base, idx as u64);
        let (metrics, _) = run_with_options(&scenario, force, false)
            .map_err(|e| anyhow::anyhow!("sweep point `{raw}`: {e}"))?;
        points.push(SweepPoint { value: raw.clone(), seed: scenario.seed, metrics });
    }
    Ok(points)
}

pub fn write_sweep_csv(path: &Path, param: &str, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    w.write_record(SWEEP_COLUMNS)?;
    for point in points {
        for node in &point.metrics.per_node {
            w.write_record([
                param.to_string(),
                point.value.clone(),
                point.seed.to_string(),
                node.node.to_string(),
                node.frame_receive_num.to_string(),
                node.frame_correct_num.to_string(),
                format!("{}", node.ber()),
                format!("{}", node.goodput_bps),
                point.metrics.overlap_events.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
