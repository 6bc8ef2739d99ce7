//! Ready-made scenarios.
//!
//! `field_default` models the reference deployment: four nodes on the
//! vertices of a 110 m × 90 m rectangle, one master and three slaves, a
//! 256-bit beacon at 2 Msym/s chipped 10×, the measured slot table
//! (256 / 256 / 137500 / 29124 symbols), and a delay model calibrated so
//! the uncompensated sync offset of the farthest slave averages
//! 132.941 µs with every sample below 133 µs — which puts the compensated
//! initial counter value at exactly 13300 ticks (133.0 µs at 10 ns).
//!
//! All durations are integers (nanoseconds or symbols); the period
//! identity `256 + 256 + 12 × (137500 + 29124) = 2,000,000` symbols
//! = 1 s at 2 Msym/s holds exactly.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::beacon::{DEFAULT_TAPS, DEFAULT_THRESHOLD_RATIO};
use crate::mac::SlotTable;
use crate::sim::{BeaconConfig, Receiver, Scenario, TrafficConfig};
use crate::timing::{ClockConfig, DelayDistribution, DelayModel};
use crate::NodeId;

/// Tick length: 100 MHz counter.
pub const TICK_NS: u64 = 10;
/// Synchronization period: 1 s.
pub const PERIOD_NS: u64 = 1_000_000_000;
/// OOK symbol at 2 Msym/s.
pub const SYMBOL_NS: u64 = 500;
pub const CHIPS_PER_SYMBOL: u32 = 10;
pub const BEACON_BITS: usize = 256;

/// Slot lengths in symbols.
pub const BEACON_TX_SYMBOLS: u64 = 256;
pub const BEACON_INTERVAL_SYMBOLS: u64 = 256;
pub const INFO_SYMBOLS: u64 = 137_500;
pub const GUARD_SYMBOLS: u64 = 29_124;

/// Field geometry: master at the origin, slaves on the remaining vertices
/// of the 110 m × 90 m rectangle. The farthest slave (node 3) sits on the
/// diagonal, 142.13 m out.
pub const FIELD_POSITIONS_M: [(f64, f64); 4] =
    [(0.0, 0.0), (110.0, 0.0), (110.0, 90.0), (0.0, 90.0)];

/// Processing-delay model, nanoseconds. The distribution window is
/// symmetric about the mean (so the realized mean equals the nominal one)
/// and capped so that `t_trans + max t_pro + t_ps < 133 µs` always:
/// 128000 + 474.08 + 4525 = 132999.1 ns at the upper edge.
pub const T_PS_MEAN_NS: u64 = 4_467;
pub const T_PS_SIGMA_NS: u64 = 122;
pub const T_PS_LO_NS: u64 = 4_409;
pub const T_PS_HI_NS: u64 = 4_525;
/// Compensation constant: with the field propagation this yields
/// `c_initial = round((128000 + 474.08 + 4526) / 10) = 13300` ticks.
pub const T_PS_TILDE_NS: u64 = 4_526;

/// Declared sync-error bound for the admissibility validators: generous
/// for compensation residuals of a few hundred nanoseconds.
pub const TD_BOUND_NS: u64 = 400;

/// Default per-symbol means for the high-SNR regime in which every frame
/// decodes: 10 signal photoelectrons per chip (100 per symbol) against
/// 0.1 per chip of background.
pub const LAMBDA_S_PER_SYMBOL: f64 = 100.0;
pub const LAMBDA_B_PER_SYMBOL: f64 = 1.0;

pub const PAYLOAD_BITS: usize = 1024;
pub const PREAMBLE_SYMBOLS: usize = 64;
pub const FRAMES_PER_PAIR_FULL: u64 = 10_000;
pub const FRAMES_PER_PAIR_DESK: u64 = 100;

fn uniform_gains(n: usize) -> Vec<Vec<f64>> {
    let mut gains = vec![vec![1.0; n]; n];
    for (i, row) in gains.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    gains
}

/// Every node carries one receiver per peer (K = N−1), aimed and at unit
/// gain.
fn full_coverage_receivers(n: u32) -> Vec<Vec<Receiver>> {
    (1..=n)
        .map(|me| {
            (1..=n)
                .filter(|&peer| peer != me)
                .map(|peer| Receiver { aim: NodeId(peer), gain: 1.0 })
                .collect()
        })
        .collect()
}

fn field_delay_model() -> DelayModel {
    DelayModel::from_positions(
        (BEACON_BITS as u64 * SYMBOL_NS) as f64 * 1e-9,
        &FIELD_POSITIONS_M,
        DelayDistribution::TruncatedNormal {
            mean_s: T_PS_MEAN_NS as f64 * 1e-9,
            sd_s: T_PS_SIGMA_NS as f64 * 1e-9,
            lo_s: T_PS_LO_NS as f64 * 1e-9,
            hi_s: T_PS_HI_NS as f64 * 1e-9,
        },
        T_PS_TILDE_NS as f64 * 1e-9,
    )
    .expect("field geometry is valid")
}

/// The reference four-node field scenario with the full 10000-frame quota.
pub fn field_default() -> Scenario {
    let clock = ClockConfig::new(TICK_NS, PERIOD_NS).expect("integral period");
    let table = SlotTable::new(
        4,
        BEACON_TX_SYMBOLS,
        BEACON_INTERVAL_SYMBOLS,
        INFO_SYMBOLS,
        GUARD_SYMBOLS,
        SYMBOL_NS / TICK_NS,
    )
    .expect("valid table");
    Scenario {
        positions_m: FIELD_POSITIONS_M.to_vec(),
        lambda_s_per_symbol: LAMBDA_S_PER_SYMBOL,
        lambda_b_per_symbol: LAMBDA_B_PER_SYMBOL,
        link_gains: uniform_gains(4),
        receivers: full_coverage_receivers(4),
        slot_table: table,
        clock,
        delays: field_delay_model(),
        beacon: BeaconConfig {
            degree: 8,
            taps: DEFAULT_TAPS,
            length_bits: BEACON_BITS,
            chips_per_symbol: CHIPS_PER_SYMBOL,
            threshold_ratio: DEFAULT_THRESHOLD_RATIO,
        },
        traffic: TrafficConfig {
            frames_per_pair: FRAMES_PER_PAIR_FULL,
            payload_bits: PAYLOAD_BITS,
            preamble_symbols: PREAMBLE_SYMBOLS,
            genie_channel_estimate: false,
            selection_combining: false,
            max_periods: 0,
        },
        td_bound_s: TD_BOUND_NS as f64 * 1e-9,
        faults: Vec::new(),
        seed: 1,
        notes: vec![
            "throughput: raw aggregate info capacity and per-node share follow from the slot \
             table alone; no 800 kbps figure is derivable from these parameters, so that \
             headline is reported as a flag, not a target"
                .to_string(),
            "processing-jitter calibration interprets the reported variance 0.015 as us^2 \
             (sd 122.5 ns before truncation)"
                .to_string(),
        ],
    }
}

/// Field scenario scaled to CI size: 100 frames per ordered pair.
pub fn desk_scale() -> Scenario {
    let mut sc = field_default();
    sc.traffic.frames_per_pair = FRAMES_PER_PAIR_DESK;
    sc
}

/// Bench-scale deployment for studying the compensated error under low
/// jitter: nodes meters apart, jitter sd capped at 25 ns (±75 ns window),
/// and the compensation constant matched to the distribution mean so the
/// residual error is pure jitter plus the propagation spread.
pub fn low_jitter_bench() -> Scenario {
    let mut sc = field_default();
    sc.positions_m = vec![(0.0, 0.0), (4.0, 0.0), (4.0, 3.0), (0.0, 3.0)];
    let mean_s = 4_931e-9;
    sc.delays = DelayModel::from_positions(
        (BEACON_BITS as u64 * SYMBOL_NS) as f64 * 1e-9,
        &sc.positions_m,
        DelayDistribution::TruncatedNormal {
            mean_s,
            sd_s: 25e-9,
            lo_s: mean_s - 75e-9,
            hi_s: mean_s + 75e-9,
        },
        mean_s,
    )
    .expect("bench geometry is valid");
    sc.td_bound_s = 100e-9;
    sc.notes = vec![];
    sc
}

/// Two-node variant of the desk scenario (master plus one slave on the
/// diagonal), mostly for fault and conservation tests.
pub fn two_node_desk() -> Scenario {
    let mut sc = desk_scale();
    sc.positions_m = vec![(0.0, 0.0), (110.0, 90.0)];
    sc.link_gains = uniform_gains(2);
    sc.receivers = full_coverage_receivers(2);
    sc.slot_table = SlotTable::new(
        2,
        BEACON_TX_SYMBOLS,
        BEACON_INTERVAL_SYMBOLS,
        INFO_SYMBOLS,
        GUARD_SYMBOLS,
        SYMBOL_NS / TICK_NS,
    )
    .expect("valid table");
    // Two nodes leave only 2 info/guard slots; shrink the period to keep
    // the identity exact: 512 + 2*(137500+29124) = 333760 symbols.
    sc.clock = ClockConfig::new(TICK_NS, 333_760 * SYMBOL_NS).expect("integral period");
    sc.delays = DelayModel::from_positions(
        (BEACON_BITS as u64 * SYMBOL_NS) as f64 * 1e-9,
        &sc.positions_m,
        *field_delay_model().t_ps(),
        T_PS_TILDE_NS as f64 * 1e-9,
    )
    .expect("two-node geometry is valid");
    sc.notes = vec![];
    sc
}

/// Small slot table for exhaustive per-tick schedule checks:
/// `C_max` stays below one million ticks for any `n` up to 6.
pub fn reduced_table(n: u32) -> SlotTable {
    SlotTable::new(n, 8, 8, 40, 12, 10).expect("valid reduced table")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timing::compute_c_initial;

    #[test]
    fn field_scenario_passes_validation() {
        let sc = field_default();
        let violations = sc.validate();
        assert!(violations.is_empty(), "{violations:?}");
    }

    #[test]
    fn field_calibration_hits_13300_ticks() {
        let sc = field_default();
        let c = sc.delays.c_initial(&sc.clock);
        assert_eq!(c.ticks, 13_300); // 133.0 us at 10 ns ticks
        assert!(c.residual_s.abs() <= 5e-9);
        // Same number through the free function.
        let row: Vec<f64> = (2..=4)
            .map(|i| sc.delays.t_pro_from_master(NodeId(i)))
            .collect();
        let direct = compute_c_initial(128e-6, &row, T_PS_TILDE_NS as f64 * 1e-9, 10e-9);
        assert_eq!(direct.ticks, 13_300);
    }

    #[test]
    fn farthest_slave_is_on_the_diagonal() {
        let sc = field_default();
        assert_eq!(sc.delays.farthest_slave(), NodeId(3));
        assert!((sc.delays.max_t_pro_from_master() - 474.08e-9).abs() < 0.05e-9);
    }

    #[test]
    fn desk_capacity_fits_quota_in_one_period() {
        let sc = desk_scale();
        assert!(sc.slot_frame_capacity() >= FRAMES_PER_PAIR_DESK);
    }

    #[test]
    fn two_node_period_identity_holds() {
        let sc = two_node_desk();
        assert!(sc.validate().is_empty());
    }

    #[test]
    fn bench_jitter_sd_is_at_most_25ns() {
        let sc = low_jitter_bench();
        assert!(sc.delays.t_ps().sd() <= 25e-9);
        assert!(sc.validate().is_empty(), "{:?}", sc.validate());
    }
}
