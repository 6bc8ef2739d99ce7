//! CSV emission and human-readable reports.
//!
//! CSV schemas are part of the tool's contract: UTF-8, one header row,
//! `.` decimal separator, column names fixed by the constants below.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

use uvtdma_core::sim::{Event, EventKind, RunMetrics, Scenario, SyncSample};

pub const METRICS_COLUMNS: [&str; 5] =
    ["node", "frame_receive_num", "frame_correct_num", "ber", "goodput_bps"];
pub const SYNC_COLUMNS: [&str; 4] = ["round", "node", "pre_ns", "post_ns"];
pub const TRACE_COLUMNS: [&str; 4] = ["tick", "node", "event", "detail"];
pub const SWEEP_COLUMNS: [&str; 9] = [
    "param",
    "value",
    "seed",
    "node",
    "frame_receive_num",
    "frame_correct_num",
    "ber",
    "goodput_bps",
    "overlap_events",
];

pub fn write_metrics_csv(path: &Path, metrics: &RunMetrics) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    w.write_record(METRICS_COLUMNS)?;
    for node in &metrics.per_node {
        w.write_record([
            node.node.to_string(),
            node.frame_receive_num.to_string(),
            node.frame_correct_num.to_string(),
            format_f64(node.ber()),
            format_f64(node.goodput_bps),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sync_csv(path: &Path, samples: &[SyncSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    w.write_record(SYNC_COLUMNS)?;
    for s in samples {
        w.write_record([
            s.round.to_string(),
            s.node.to_string(),
            format_f64(s.pre_s * 1e9),
            format_f64(s.post_s * 1e9),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv(path: &Path, events: &[Event]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    w.write_record(TRACE_COLUMNS)?;
    for e in events {
        let (name, detail) = describe_event(&e.kind);
        w.write_record([e.tick.to_string(), e.node.to_string(), name.to_string(), detail])?;
    }
    w.flush()?;
    Ok(())
}

pub fn describe_event(kind: &EventKind) -> (&'static str, String) {
    match kind {
        EventKind::SlotTransition { to } => ("slot", to.to_string()),
        EventKind::BeaconDecode { window_chip_offset } => {
            ("beacon_decode", window_chip_offset.to_string())
        }
        EventKind::CounterReload { value } => ("counter_reload", value.to_string()),
        EventKind::LateBeaconIgnored => ("late_beacon_ignored", String::new()),
        EventKind::TxStart { dst, frames } => ("tx_start", format!("dst={dst} frames={frames}")),
        EventKind::TxEnd { dst } => ("tx_end", format!("dst={dst}")),
        EventKind::Overlap { other } => ("overlap", format!("other={other}")),
    }
}

/// Shortest-roundtrip float formatting; deterministic across runs.
fn format_f64(v: f64) -> String {
    format!("{v}")
}

/// One line per admissibility constraint, with margins, plus the verdict.
pub fn validation_report(scenario: &Scenario, out: &mut impl Write) -> Result<bool> {
    use uvtdma_core::sim::ScenarioViolation as V;

    let violations = scenario.validate();
    let fails = |pred: fn(&V) -> bool| violations.iter().any(pred);

    let symbol_s = scenario.symbol_seconds();
    let t_bi_s = scenario.slot_table.beacon_interval_symbols() as f64 * symbol_s;
    let t_g_s = scenario.slot_table.guard_symbols() as f64 * symbol_s;
    let decode_latency =
        scenario.delays.max_t_pro_from_master() + scenario.delays.t_ps_tilde_s();
    let budget = uvtdma_core::timing::sync_error_budget_s(t_bi_s, &scenario.delays);

    let line = |out: &mut dyn Write, ok: bool, name: &str, detail: String| -> Result<()> {
        writeln!(out, "{} {name}: {detail}", if ok { "PASS" } else { "FAIL" })?;
        Ok(())
    };

    line(
        out,
        !fails(|v| matches!(v, V::Table(uvtdma_core::mac::SlotTableViolation::BeaconIntervalTooShort { .. }))),
        "beacon-interval length",
        format!("t_bi {:.3e} s >= decode latency {:.3e} s", t_bi_s, decode_latency),
    )?;
    line(
        out,
        !fails(|v| matches!(v, V::Table(uvtdma_core::mac::SlotTableViolation::SyncBudgetExceeded { .. }))),
        "sync-error budget",
        format!(
            "td bound {:.3e} s <= |t_bi - decode latency| {:.3e} s",
            scenario.td_bound_s, budget
        ),
    )?;
    line(
        out,
        !fails(|v| matches!(v, V::Table(uvtdma_core::mac::SlotTableViolation::GuardTooShort { .. }))),
        "guard-interval length",
        format!("t_g {:.3e} s >= 2 x td bound {:.3e} s", t_g_s, 2.0 * scenario.td_bound_s),
    )?;
    line(
        out,
        !fails(|v| matches!(v, V::Table(uvtdma_core::mac::SlotTableViolation::PeriodMismatch { .. }))),
        "period identity",
        format!(
            "slot sum {} ticks vs C_max {} ticks",
            scenario.slot_table.total_ticks(),
            scenario.clock.c_max()
        ),
    )?;

    // Anything else (grid alignment, coverage, channel validity).
    let structural: Vec<&V> = violations
        .iter()
        .filter(|v| !matches!(v, V::Table(_)))
        .collect();
    if structural.is_empty() {
        writeln!(out, "PASS structure: grids, coverage, and channel parameters consistent")?;
    } else {
        for v in structural {
            writeln!(out, "FAIL structure: {v}")?;
        }
    }
    Ok(violations.is_empty())
}

pub fn print_run_summary(metrics: &RunMetrics, out: &mut impl Write) -> Result<()> {
    writeln!(
        out,
        "periods {} | simulated {:.3} s | overlap events {}",
        metrics.periods, metrics.sim_seconds, metrics.overlap_events
    )?;
    writeln!(
        out,
        "throughput: raw aggregate {} bps | per node {} bps | goodput {} bps",
        format_f64(metrics.throughput.raw_aggregate_bps),
        format_f64(metrics.throughput.per_node_bps),
        format_f64(metrics.throughput.goodput_bps),
    )?;
    writeln!(out, "node  frame_receive_num  frame_correct_num  ber          goodput_bps")?;
    for n in &metrics.per_node {
        writeln!(
            out,
            "{:<5} {:<18} {:<18} {:<12.6} {}",
            n.node,
            n.frame_receive_num,
            n.frame_correct_num,
            n.ber(),
            format_f64(n.goodput_bps),
        )?;
    }
    for pair in &metrics.per_pair {
        if pair.sent != pair.received + pair.lost_channel + pair.dropped_unsynced {
            writeln!(out, "WARNING: conservation mismatch on pair {}->{}", pair.src, pair.dst)?;
        }
    }
    for note in &metrics.notes {
        writeln!(out, "note: {note}")?;
    }
    Ok(())
}
