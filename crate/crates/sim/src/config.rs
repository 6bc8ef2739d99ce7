//! Structured plain-text scenario configuration.
//!
//! All physical quantities carry their unit in the key name, and every
//! duration is an integer (nanoseconds or symbols) so period arithmetic
//! stays exact. Unknown keys are rejected. Any key can be overridden from
//! the environment with the `UVTDMA_` prefix and `__` as the path
//! separator, e.g. `UVTDMA_SLOTS__GUARD_SYMBOLS=0`.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use uvtdma_core::mac::SlotTable;
use uvtdma_core::sim::{BeaconConfig, Fault, Receiver, Scenario, TrafficConfig};
use uvtdma_core::timing::{ClockConfig, DelayDistribution, DelayModel};
use uvtdma_core::NodeId;

pub const ENV_PREFIX: &str = "UVTDMA_";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub clock: ClockSection,
    pub beacon: BeaconSection,
    pub slots: SlotsSection,
    pub nodes: NodesSection,
    pub channel: ChannelSection,
    pub delays: DelaysSection,
    pub traffic: TrafficSection,
    #[serde(default)]
    pub faults: Vec<FaultEntry>,
    #[serde(default)]
    pub meta: MetaSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockSection {
    pub t_clock_ns: u64,
    pub period_ns: u64,
    pub symbol_ns: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeaconSection {
    pub length_bits: usize,
    pub lfsr_degree: u32,
    pub lfsr_taps: u32,
    pub chips_per_symbol: u32,
    #[serde(default = "default_threshold_ratio")]
    pub threshold_ratio: f64,
}

fn default_threshold_ratio() -> f64 {
    uvtdma_core::beacon::DEFAULT_THRESHOLD_RATIO
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotsSection {
    pub beacon_tx_symbols: u64,
    pub beacon_interval_symbols: u64,
    pub info_symbols: u64,
    pub guard_symbols: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodesSection {
    /// `[x_m, y_m]` per node; index 0 is the master.
    pub positions_m: Vec<[f64; 2]>,
    /// Receivers per node, each aimed at one peer in ascending id order.
    /// Defaults to one per peer (full coverage).
    #[serde(default)]
    pub receivers_per_node: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub lambda_s_per_symbol: f64,
    pub lambda_b_per_symbol: f64,
    #[serde(default)]
    pub gain_overrides: Vec<GainOverride>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainOverride {
    pub src: u32,
    pub dst: u32,
    pub gain: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaysSection {
    /// `constant`, `uniform`, or `truncated_normal`.
    pub t_ps_family: String,
    pub t_ps_mean_ns: u64,
    #[serde(default)]
    pub t_ps_sd_ns: u64,
    #[serde(default)]
    pub t_ps_lo_ns: u64,
    #[serde(default)]
    pub t_ps_hi_ns: u64,
    pub t_ps_tilde_ns: u64,
    pub td_bound_ns: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    pub frames_per_pair: u64,
    pub payload_bits: usize,
    pub preamble_symbols: usize,
    #[serde(default)]
    pub genie_channel_estimate: bool,
    #[serde(default)]
    pub selection_combining: bool,
    #[serde(default)]
    pub max_periods: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEntry {
    pub kind: String,
    #[serde(default)]
    pub period: Option<u64>,
    #[serde(default)]
    pub node: Option<u32>,
    #[serde(default)]
    pub ticks: Option<i64>,
    #[serde(default)]
    pub from_tick: Option<i64>,
    #[serde(default)]
    pub to_tick: Option<i64>,
    #[serde(default)]
    pub lambda_per_symbol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaSection {
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Parse a raw override value with TOML scalar semantics: integer, then
/// float, then boolean, else string.
fn parse_scalar(raw: &str) -> toml::Value {
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    toml::Value::String(raw.to_string())
}

/// Set `table[path[0]][path[1]]… = value`. Strict mode (used by sweeps)
/// requires the key to already exist in the document; insert mode (used
/// by environment overrides) creates it and leaves rejection of genuinely
/// unknown keys to deserialization.
pub fn set_path(
    table: &mut toml::Table,
    path: &[&str],
    value: toml::Value,
    insert: bool,
) -> Result<()> {
    let (head, rest) = path.split_first().ok_or_else(|| anyhow!("empty override path"))?;
    if rest.is_empty() {
        if !insert && !table.contains_key(*head) {
            bail!("unknown parameter `{head}`");
        }
        table.insert((*head).to_string(), value);
        return Ok(());
    }
    if insert && !table.contains_key(*head) {
        table.insert((*head).to_string(), toml::Value::Table(toml::Table::new()));
    }
    match table.get_mut(*head) {
        Some(toml::Value::Table(inner)) => set_path(inner, rest, value, insert),
        _ => bail!("unknown parameter section `{head}`"),
    }
}

fn apply_env_overrides(table: &mut toml::Table) -> Result<()> {
    let mut vars: Vec<(String, String)> = std::env::vars()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    vars.sort();
    for (key, raw) in vars {
        let path_str = key[ENV_PREFIX.len()..].to_lowercase();
        let path: Vec<&str> = path_str.split("__").collect();
        set_path(table, &path, parse_scalar(&raw), true)
            .with_context(|| format!("environment override {key}"))?;
    }
    Ok(())
}

/// Load a config file, apply environment overrides, reject unknown keys.
pub fn load(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut table: toml::Table =
        text.parse().with_context(|| format!("parsing config {}", path.display()))?;
    apply_env_overrides(&mut table)?;
    from_table(table)
}

/// Deserialize a (possibly overridden) TOML table into a config.
pub fn from_table(table: toml::Table) -> Result<Config> {
    let config: Config =
        toml::Value::Table(table).try_into().context("invalid configuration")?;
    Ok(config)
}

/// Parse a config file into the raw TOML table (for sweeps).
pub fn load_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut table: toml::Table =
        text.parse().with_context(|| format!("parsing config {}", path.display()))?;
    apply_env_overrides(&mut table)?;
    Ok(table)
}

impl FaultEntry {
    fn to_fault(&self) -> Result<Fault> {
        let need = |opt: Option<u64>, what: &str| {
            opt.ok_or_else(|| anyhow!("fault `{}` needs `{what}`", self.kind))
        };
        match self.kind.as_str() {
            "drop_beacon" => Ok(Fault::DropBeacon { period: need(self.period, "period")? }),
            "offset_clock" => Ok(Fault::OffsetClock {
                node: NodeId(need(self.node.map(u64::from), "node")? as u32),
                ticks: self.ticks.ok_or_else(|| anyhow!("fault `offset_clock` needs `ticks`"))?,
            }),
            "jam" => Ok(Fault::Jam {
                node: NodeId(need(self.node.map(u64::from), "node")? as u32),
                from_tick: self
                    .from_tick
                    .ok_or_else(|| anyhow!("fault `jam` needs `from_tick`"))?,
                to_tick: self.to_tick.ok_or_else(|| anyhow!("fault `jam` needs `to_tick`"))?,
                lambda_per_symbol: self
                    .lambda_per_symbol
                    .ok_or_else(|| anyhow!("fault `jam` needs `lambda_per_symbol`"))?,
            }),
            other => bail!("unknown fault kind `{other}`"),
        }
    }
}

impl Config {
    /// Build the runnable scenario. Structural errors (grids that do not
    /// divide, bad distributions) surface here; admissibility violations
    /// are left to `Scenario::validate`.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let n = self.nodes.positions_m.len() as u32;
        if n < 2 {
            bail!("at least two nodes required, got {n}");
        }
        let clock = ClockConfig::new(self.clock.t_clock_ns, self.clock.period_ns)
            .map_err(|e| anyhow!("{e}"))?;
        if !self.clock.symbol_ns.is_multiple_of(self.clock.t_clock_ns) {
            bail!(
                "symbol_ns {} is not a multiple of t_clock_ns {}",
                self.clock.symbol_ns,
                self.clock.t_clock_ns
            );
        }
        let symbol_ticks = self.clock.symbol_ns / self.clock.t_clock_ns;
        let table = SlotTable::new(
            n,
            self.slots.beacon_tx_symbols,
            self.slots.beacon_interval_symbols,
            self.slots.info_symbols,
            self.slots.guard_symbols,
            symbol_ticks,
        )
        .map_err(|e| anyhow!("{e}"))?;

        let t_ps = self.delay_distribution()?;
        let positions: Vec<(f64, f64)> =
            self.nodes.positions_m.iter().map(|p| (p[0], p[1])).collect();
        let delays = DelayModel::from_positions(
            self.slots.beacon_tx_symbols as f64 * self.clock.symbol_ns as f64 * 1e-9,
            &positions,
            t_ps,
            self.delays.t_ps_tilde_ns as f64 * 1e-9,
        )
        .map_err(|e| anyhow!("{e}"))?;

        let mut link_gains = vec![vec![1.0; n as usize]; n as usize];
        for (i, row) in link_gains.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for o in &self.channel.gain_overrides {
            if o.src < 1 || o.src > n || o.dst < 1 || o.dst > n || o.src == o.dst {
                bail!("gain override with invalid pair ({}, {})", o.src, o.dst);
            }
            link_gains[(o.src - 1) as usize][(o.dst - 1) as usize] = o.gain;
        }

        let k = self.nodes.receivers_per_node.unwrap_or(n - 1);
        let receivers: Vec<Vec<Receiver>> = (1..=n)
            .map(|me| {
                (1..=n)
                    .filter(|&peer| peer != me)
                    .take(k as usize)
                    .map(|peer| Receiver { aim: NodeId(peer), gain: 1.0 })
                    .collect()
            })
            .collect();

        let faults = self
            .faults
            .iter()
            .map(FaultEntry::to_fault)
            .collect::<Result<Vec<_>>>()?;

        Ok(Scenario {
            positions_m: positions,
            lambda_s_per_symbol: self.channel.lambda_s_per_symbol,
            lambda_b_per_symbol: self.channel.lambda_b_per_symbol,
            link_gains,
            receivers,
            slot_table: table,
            clock,
            delays,
            beacon: BeaconConfig {
                degree: self.beacon.lfsr_degree,
                taps: self.beacon.lfsr_taps,
                length_bits: self.beacon.length_bits,
                chips_per_symbol: self.beacon.chips_per_symbol,
                threshold_ratio: self.beacon.threshold_ratio,
            },
            traffic: TrafficConfig {
                frames_per_pair: self.traffic.frames_per_pair,
                payload_bits: self.traffic.payload_bits,
                preamble_symbols: self.traffic.preamble_symbols,
                genie_channel_estimate: self.traffic.genie_channel_estimate,
                selection_combining: self.traffic.selection_combining,
                max_periods: self.traffic.max_periods,
            },
            td_bound_s: self.delays.td_bound_ns as f64 * 1e-9,
            faults,
            seed: self.seed,
            notes: self.meta.notes.clone(),
        })
    }

    fn delay_distribution(&self) -> Result<DelayDistribution> {
        let ns = |v: u64| v as f64 * 1e-9;
        let d = &self.delays;
        let dist = match d.t_ps_family.as_str() {
            "constant" => DelayDistribution::Constant { value_s: ns(d.t_ps_mean_ns) },
            "uniform" => DelayDistribution::Uniform { lo_s: ns(d.t_ps_lo_ns), hi_s: ns(d.t_ps_hi_ns) },
            "truncated_normal" => DelayDistribution::TruncatedNormal {
                mean_s: ns(d.t_ps_mean_ns),
                sd_s: ns(d.t_ps_sd_ns),
                lo_s: ns(d.t_ps_lo_ns),
                hi_s: ns(d.t_ps_hi_ns),
            },
            other => bail!("unsupported t_ps_family `{other}`"),
        };
        dist.validate().map_err(|e| anyhow!("{e}"))?;
        Ok(dist)
    }
}
