//! Deterministic discrete-event kernel for N-node scenario runs.
//!
//! A run advances period by period. Each period the master broadcasts the
//! beacon; every slave receives a chip-level window around the beacon's
//! true arrival span (chip granularity exists only there — data slots work
//! at symbol granularity), correlates, and on detection reloads its counter
//! to the compensated initial value. Data then flows in the slot order of
//! the table: a pair transmits only when both ends are synchronized this
//! period, receivers demodulate with a per-slot channel estimate, and
//! frames are recovered by sync-word scanning.
//!
//! Everything is derived from named RNG substreams of the scenario seed,
//! so repeated runs are bit-identical, including the optional event trace.

mod kernel;
mod metrics;

pub use metrics::{NodeMetrics, PairMetrics, RunMetrics, SyncSample, Throughput};

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::beacon::{BeaconError, BeaconSequence};
use crate::mac::{validate_slot_table, SlotTable, SlotTableViolation};
use crate::phy::{ChannelLink, ChipConfig, PhyError, PoissonMeans};
use crate::rng::{substream, SimRng, StreamPurpose};
use crate::timing::{ClockConfig, DelayModel, TimingError};
use crate::{mac, NodeId};

/// Beacon parameters of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeaconConfig {
    pub degree: u32,
    pub taps: u32,
    pub length_bits: usize,
    pub chips_per_symbol: u32,
    pub threshold_ratio: f64,
}

/// Traffic and receiver-processing parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficConfig {
    /// Frames each ordered pair must send before the run ends.
    pub frames_per_pair: u64,
    pub payload_bits: usize,
    /// Known alternating preamble opening every information slot, used for
    /// the per-slot channel estimate.
    pub preamble_symbols: usize,
    /// Skip estimation and hand the detector the true link means.
    pub genie_channel_estimate: bool,
    /// Decode each pair on the maximum-gain receiver instead of the
    /// designated (aimed) one.
    pub selection_combining: bool,
    /// Hard period cap; 0 means "periods needed for the quota plus slack".
    pub max_periods: u64,
}

/// One physical receiver of a node: the peer it is aimed at and its gain
/// toward that peer. Off-aim gain is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Receiver {
    pub aim: NodeId,
    pub gain: f64,
}

/// Injectable faults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fault {
    /// The master skips the beacon of one period (zero-based).
    DropBeacon { period: u64 },
    /// Additive optical interference at one node's receivers over an
    /// absolute tick interval, in per-symbol photoelectrons.
    Jam { node: NodeId, from_tick: i64, to_tick: i64, lambda_per_symbol: f64 },
    /// Shifts the node's slot timing by the given ticks (positive = late)
    /// after each resynchronization, without affecting beacon acceptance.
    /// Models a systematic output-path delay miscalibration.
    OffsetClock { node: NodeId, ticks: i64 },
}

/// A complete, self-contained description of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// 2-D node positions; index 0 is the master.
    pub positions_m: Vec<(f64, f64)>,
    /// Per-symbol signal mean common to all links (scaled per link by
    /// `link_gains`).
    pub lambda_s_per_symbol: f64,
    /// Per-symbol background mean at every receiver.
    pub lambda_b_per_symbol: f64,
    /// `link_gains[src][dst]`, dimensionless; diagonal ignored.
    pub link_gains: Vec<Vec<f64>>,
    /// Receivers per node; `receivers[n]` lists node `n+1`'s PMTs.
    pub receivers: Vec<Vec<Receiver>>,
    pub slot_table: SlotTable,
    pub clock: ClockConfig,
    pub delays: DelayModel,
    pub beacon: BeaconConfig,
    pub traffic: TrafficConfig,
    /// Declared sync-error bound used by the admissibility validators.
    pub td_bound_s: f64,
    pub faults: Vec<Fault>,
    pub seed: u64,
    /// Provenance notes copied into the run metrics.
    pub notes: Vec<String>,
}

/// A constraint the scenario violates. Violations are data: `run` refuses
/// to start on any of them unless forced.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioViolation {
    Table(SlotTableViolation),
    /// Beacon must fill its slot exactly: `t_bt = L` symbols.
    BeaconSlotMismatch { beacon_bits: usize, slot_symbols: u64 },
    /// Symbol length must be a whole number of chips of whole nanoseconds.
    ChipGridMisaligned { symbol_ns: u64, chips_per_symbol: u32 },
    /// Symbol length must be a whole number of counter ticks.
    SymbolGridMisaligned { symbol_ns: u64, tick_ns: u64 },
    /// Fewer than two nodes, or tables/positions disagree on the count.
    BadTopology { positions: usize, table_nodes: u32 },
    /// Information slot too short for the preamble plus one frame.
    InfoSlotTooSmall { needed_symbols: u64, available_symbols: u64 },
    /// A pair carries traffic but the destination has no receiver aimed at
    /// the source.
    UncoveredPair { src: NodeId, dst: NodeId },
    /// Invalid Poisson means or gains.
    BadChannel(String),
}

impl fmt::Display for ScenarioViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioViolation::Table(v) => write!(f, "{v}"),
            ScenarioViolation::BeaconSlotMismatch { beacon_bits, slot_symbols } => write!(
                f,
                "beacon of {beacon_bits} bits does not fill the {slot_symbols}-symbol transmission slot"
            ),
            ScenarioViolation::ChipGridMisaligned { symbol_ns, chips_per_symbol } => write!(
                f,
                "symbol of {symbol_ns} ns is not a whole number of {chips_per_symbol} chips"
            ),
            ScenarioViolation::SymbolGridMisaligned { symbol_ns, tick_ns } => {
                write!(f, "symbol of {symbol_ns} ns is not a multiple of the {tick_ns} ns tick")
            }
            ScenarioViolation::BadTopology { positions, table_nodes } => {
                write!(f, "{positions} positions for a {table_nodes}-node slot table")
            }
            ScenarioViolation::InfoSlotTooSmall { needed_symbols, available_symbols } => write!(
                f,
                "info slot of {available_symbols} symbols cannot carry the preamble plus one frame ({needed_symbols})"
            ),
            ScenarioViolation::UncoveredPair { src, dst } => {
                write!(f, "node {dst} has no receiver aimed at node {src}")
            }
            ScenarioViolation::BadChannel(msg) => write!(f, "bad channel: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    /// The scenario failed validation (and the run was not forced).
    InvalidScenario(Vec<ScenarioViolation>),
    InvalidFault(String),
    Phy(PhyError),
    Timing(TimingError),
    Mac(mac::MacError),
    Beacon(BeaconError),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::InvalidScenario(violations) => {
                write!(f, "invalid scenario ({} violations)", violations.len())
            }
            SimError::InvalidFault(msg) => write!(f, "invalid fault: {msg}"),
            SimError::Phy(e) => write!(f, "{e}"),
            SimError::Timing(e) => write!(f, "{e}"),
            SimError::Mac(e) => write!(f, "{e}"),
            SimError::Beacon(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for SimError {}

impl From<PhyError> for SimError {
    fn from(e: PhyError) -> Self {
        SimError::Phy(e)
    }
}

impl From<TimingError> for SimError {
    fn from(e: TimingError) -> Self {
        SimError::Timing(e)
    }
}

impl From<BeaconError> for SimError {
    fn from(e: BeaconError) -> Self {
        SimError::Beacon(e)
    }
}

impl From<mac::MacError> for SimError {
    fn from(e: mac::MacError) -> Self {
        SimError::Mac(e)
    }
}

/// One entry of the deterministic event log. Events are ordered by
/// `(tick, node, kind rank)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub tick: i64,
    pub node: NodeId,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    SlotTransition { to: mac::SlotKind },
    BeaconDecode { window_chip_offset: usize },
    CounterReload { value: u64 },
    LateBeaconIgnored,
    TxStart { dst: NodeId, frames: u64 },
    TxEnd { dst: NodeId },
    Overlap { other: NodeId },
}

impl EventKind {
    /// Deterministic tie-break rank for same-tick, same-node events.
    pub fn rank(&self) -> u8 {
        match self {
            EventKind::SlotTransition { .. } => 0,
            EventKind::BeaconDecode { .. } => 1,
            EventKind::CounterReload { .. } => 2,
            EventKind::LateBeaconIgnored => 3,
            EventKind::TxStart { .. } => 4,
            EventKind::TxEnd { .. } => 5,
            EventKind::Overlap { .. } => 6,
        }
    }
}

impl Scenario {
    pub fn node_count(&self) -> u32 {
        self.positions_m.len() as u32
    }

    /// Symbol length on the wall clock.
    pub fn symbol_ns(&self) -> u64 {
        self.slot_table.symbol_ticks() * self.clock.tick_ns()
    }

    pub fn chip_ns(&self) -> u64 {
        self.symbol_ns() / u64::from(self.beacon.chips_per_symbol)
    }

    pub fn symbol_seconds(&self) -> f64 {
        self.symbol_ns() as f64 * 1e-9
    }

    /// Baseline per-symbol means shared by all links.
    pub fn base_means(&self) -> Result<PoissonMeans, PhyError> {
        PoissonMeans::new(self.lambda_s_per_symbol, self.lambda_b_per_symbol)
    }

    /// The directed link `(src, dst)` with its gain and geometry.
    pub fn link(&self, src: NodeId, dst: NodeId) -> Result<ChannelLink, PhyError> {
        let gain = self.link_gains[src.index()][dst.index()];
        let dx = self.positions_m[src.index()].0 - self.positions_m[dst.index()].0;
        let dy = self.positions_m[src.index()].1 - self.positions_m[dst.index()].1;
        let distance_m = crate::math::sqrt(dx * dx + dy * dy);
        ChannelLink::new(src, dst, self.base_means()?, gain, distance_m)
    }

    pub fn chip_config(&self) -> Result<ChipConfig, PhyError> {
        ChipConfig::new(self.beacon.chips_per_symbol, self.symbol_seconds())
    }

    pub fn beacon_sequence(&self) -> Result<BeaconSequence, BeaconError> {
        BeaconSequence::generate(self.beacon.degree, self.beacon.taps, self.beacon.length_bits)
    }

    /// Frames one information slot can carry.
    pub fn slot_frame_capacity(&self) -> u64 {
        let frame = mac::frame::frame_bits(self.traffic.payload_bits) as u64;
        let usable = self
            .slot_table
            .info_symbols()
            .saturating_sub(self.traffic.preamble_symbols as u64);
        usable / frame
    }

    /// Periods needed to exhaust the frame quota, plus resync slack.
    pub fn planned_periods(&self) -> u64 {
        if self.traffic.max_periods > 0 {
            return self.traffic.max_periods;
        }
        let capacity = self.slot_frame_capacity().max(1);
        self.traffic.frames_per_pair.div_ceil(capacity) + 8
    }

    /// The RNG substream of `(node, purpose)` for this scenario's seed.
    pub fn stream(&self, node: NodeId, purpose: StreamPurpose) -> SimRng {
        substream(self.seed, node, purpose)
    }

    /// Check every admissibility constraint. An empty list means the
    /// scenario is runnable without force.
    pub fn validate(&self) -> Vec<ScenarioViolation> {
        let mut violations: Vec<ScenarioViolation> =
            validate_slot_table(&self.slot_table, &self.clock, &self.delays, self.td_bound_s)
                .into_iter()
                .map(ScenarioViolation::Table)
                .collect();

        let n = self.node_count();
        if n < 2
            || self.slot_table.node_count() != n
            || self.link_gains.len() != n as usize
            || self.receivers.len() != n as usize
            || self.delays.node_count() != n as usize
        {
            violations.push(ScenarioViolation::BadTopology {
                positions: self.positions_m.len(),
                table_nodes: self.slot_table.node_count(),
            });
            return violations; // everything below indexes by node
        }

        if self.beacon.length_bits as u64 != self.slot_table.beacon_tx_symbols() {
            violations.push(ScenarioViolation::BeaconSlotMismatch {
                beacon_bits: self.beacon.length_bits,
                slot_symbols: self.slot_table.beacon_tx_symbols(),
            });
        }
        let symbol_ns = self.symbol_ns();
        if !symbol_ns.is_multiple_of(u64::from(self.beacon.chips_per_symbol)) {
            violations.push(ScenarioViolation::ChipGridMisaligned {
                symbol_ns,
                chips_per_symbol: self.beacon.chips_per_symbol,
            });
        }
        if let Err(e) = self.base_means() {
            violations.push(ScenarioViolation::BadChannel(alloc::format!("{e}")));
        }
        if let Err(e) = self.beacon_sequence() {
            violations.push(ScenarioViolation::BadChannel(alloc::format!("{e}")));
        }

        let frame = mac::frame::frame_bits(self.traffic.payload_bits) as u64;
        let needed = self.traffic.preamble_symbols as u64 + frame;
        if self.traffic.frames_per_pair > 0 && needed > self.slot_table.info_symbols() {
            violations.push(ScenarioViolation::InfoSlotTooSmall {
                needed_symbols: needed,
                available_symbols: self.slot_table.info_symbols(),
            });
        }

        if self.traffic.frames_per_pair > 0 {
            for src in 1..=n {
                for dst in 1..=n {
                    if src == dst {
                        continue;
                    }
                    let (s, d) = (NodeId(src), NodeId(dst));
                    let covered = self.receivers[d.index()].iter().any(|r| r.aim == s);
                    if !covered {
                        violations.push(ScenarioViolation::UncoveredPair { src: s, dst: d });
                    }
                }
            }
        }
        violations
    }
}

/// Return a copy of the scenario with the fault applied, after checking
/// the fault parameters against the run bounds.
pub fn inject_fault(scenario: &Scenario, fault: Fault) -> Result<Scenario, SimError> {
    let n = scenario.node_count();
    match fault {
        Fault::DropBeacon { period } => {
            if period >= scenario.planned_periods() {
                return Err(SimError::InvalidFault(alloc::format!(
                    "drop_beacon period {period} beyond the planned {} periods",
                    scenario.planned_periods()
                )));
            }
        }
        Fault::Jam { node, from_tick, to_tick, lambda_per_symbol } => {
            if node.0 < 1 || node.0 > n {
                return Err(SimError::InvalidFault(alloc::format!("jam node {node} out of range")));
            }
            if from_tick >= to_tick {
                return Err(SimError::InvalidFault("empty jam interval".into()));
            }
            if !lambda_per_symbol.is_finite() || lambda_per_symbol < 0.0 {
                return Err(SimError::InvalidFault("invalid jam intensity".into()));
            }
        }
        Fault::OffsetClock { node, .. } => {
            if node.0 < 2 || node.0 > n {
                return Err(SimError::InvalidFault(alloc::format!(
                    "offset_clock target {node} must be a slave"
                )));
            }
        }
    }
    let mut out = scenario.clone();
    out.faults.push(fault);
    Ok(out)
}

/// Run a scenario to completion with default options (no force, no trace).
pub fn run(scenario: &Scenario) -> Result<RunMetrics, SimError> {
    run_with_options(scenario, false, false).map(|(m, _)| m)
}

/// Run with explicit options. `force` runs despite validation violations;
/// `trace` collects the deterministic event log.
pub fn run_with_options(
    scenario: &Scenario,
    force: bool,
    trace: bool,
) -> Result<(RunMetrics, Option<Vec<Event>>), SimError> {
    let violations = scenario.validate();
    if !violations.is_empty() && !force {
        return Err(SimError::InvalidScenario(violations));
    }
    kernel::Kernel::new(scenario, trace)?.run()
}

/// Monte-Carlo trial of the beacon round alone: for each trial and slave,
/// draw one processing delay and record the uncompensated offset
/// `t_trans + t_pro + t_ps` and the compensated residual. Uses the delay
/// model directly — chip quantization of the live correlator is absorbed
/// into the guard budget, not into these samples.
pub fn run_sync_trial(scenario: &Scenario, trials: u64) -> Result<Vec<SyncSample>, SimError> {
    if trials == 0 {
        return Ok(Vec::new());
    }
    let n = scenario.node_count();
    let mut samples = Vec::with_capacity((trials * u64::from(n - 1)) as usize);
    let mut streams: Vec<SimRng> = (2..=n)
        .map(|id| scenario.stream(NodeId(id), StreamPurpose::ProcessingDelay))
        .collect();
    for trial in 0..trials {
        for (idx, rng) in streams.iter_mut().enumerate() {
            let node = NodeId(idx as u32 + 2);
            let t_ps = scenario.delays.t_ps().sample(rng);
            let pre = scenario.delays.t_trans_s()
                + scenario.delays.t_pro_from_master(node)
                + t_ps;
            let post = crate::timing::sync_error(node, t_ps, &scenario.delays);
            samples.push(SyncSample { round: trial, node, pre_s: pre, post_s: post });
        }
    }
    Ok(samples)
}
