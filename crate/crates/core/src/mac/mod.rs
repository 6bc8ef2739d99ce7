//! TDMA schedule, slot-transition state machines, and admissibility checks.
//!
//! One period is `[BT][BI][U G][U G]…` — a beacon-transmission slot, a
//! beacon-interval slot in which slaves decode, then one information slot
//! plus one guard slot for every ordered node pair `(i, j)`. A slave's
//! timeline has no BT slot: the whole leading region is its beacon
//! interval. Slot boundaries are pure counter arithmetic, so the schedule
//! exists in two interchangeable forms: a closed-form `counter → slot` map
//! ([`slot_at`]) and an incremental per-tick state machine
//! ([`step_state_machine`]). The two are required to agree tick-for-tick;
//! the test suite enforces it.

pub mod frame;

use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::timing::{ClockConfig, DelayModel, TimeCounter};
use crate::{NodeId, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacError {
    /// Node count below 2 or slot durations that cannot form a schedule.
    InvalidTable,
    /// Pair index arithmetic with `i == j` or out-of-range ids.
    InvalidPair { i: u32, j: u32, n: u32 },
    /// Counter value at or beyond the period length.
    CounterOutOfRange { ticks: u64, period: u64 },
}

impl fmt::Display for MacError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MacError::InvalidTable => write!(f, "invalid slot table"),
            MacError::InvalidPair { i, j, n } => {
                write!(f, "invalid ordered pair ({i}, {j}) for {n} nodes")
            }
            MacError::CounterOutOfRange { ticks, period } => {
                write!(f, "counter {ticks} outside period of {period} ticks")
            }
        }
    }
}

impl core::error::Error for MacError {}

/// The four slot lengths plus the node count — everything needed to lay
/// out one TDMA period. Durations are whole symbols; `symbol_ticks` maps
/// them onto the counter grid exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotTable {
    n: u32,
    t_bt_sym: u64,
    t_bi_sym: u64,
    t_u_sym: u64,
    t_g_sym: u64,
    symbol_ticks: u64,
}

impl SlotTable {
    /// `t_g_sym` may be zero — that is the degenerate configuration the
    /// guard-interval experiments exercise; validators flag it.
    pub fn new(
        n: u32,
        t_bt_sym: u64,
        t_bi_sym: u64,
        t_u_sym: u64,
        t_g_sym: u64,
        symbol_ticks: u64,
    ) -> Result<Self, MacError> {
        if n < 2 || t_bt_sym == 0 || t_bi_sym == 0 || t_u_sym == 0 || symbol_ticks == 0 {
            return Err(MacError::InvalidTable);
        }
        Ok(Self { n, t_bt_sym, t_bi_sym, t_u_sym, t_g_sym, symbol_ticks })
    }

    pub fn node_count(&self) -> u32 {
        self.n
    }

    pub fn beacon_tx_symbols(&self) -> u64 {
        self.t_bt_sym
    }

    pub fn beacon_interval_symbols(&self) -> u64 {
        self.t_bi_sym
    }

    pub fn info_symbols(&self) -> u64 {
        self.t_u_sym
    }

    pub fn guard_symbols(&self) -> u64 {
        self.t_g_sym
    }

    pub fn symbol_ticks(&self) -> u64 {
        self.symbol_ticks
    }

    /// Ordered pairs per period: `N (N - 1)`.
    pub fn pair_count(&self) -> u64 {
        u64::from(self.n) * u64::from(self.n - 1)
    }

    pub fn total_symbols(&self) -> u64 {
        self.t_bt_sym + self.t_bi_sym + self.pair_count() * (self.t_u_sym + self.t_g_sym)
    }

    /// Period length on the counter grid.
    pub fn total_ticks(&self) -> u64 {
        self.total_symbols() * self.symbol_ticks
    }

    pub fn beacon_tx_ticks(&self) -> u64 {
        self.t_bt_sym * self.symbol_ticks
    }

    pub fn beacon_region_ticks(&self) -> u64 {
        (self.t_bt_sym + self.t_bi_sym) * self.symbol_ticks
    }

    pub fn slot_cycle_ticks(&self) -> u64 {
        (self.t_u_sym + self.t_g_sym) * self.symbol_ticks
    }

    pub fn info_ticks(&self) -> u64 {
        self.t_u_sym * self.symbol_ticks
    }

    /// Start tick of the information slot of ordered pair `(src, dst)`.
    pub fn info_start_tick(&self, src: NodeId, dst: NodeId) -> Result<u64, MacError> {
        let idx = ordered_pair_index(src, dst, self.n)?;
        Ok(self.beacon_region_ticks() + idx * self.slot_cycle_ticks())
    }
}

/// Identifies a position in the TDMA schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotKind {
    BeaconTx,
    BeaconInterval,
    Info { src: NodeId, dst: NodeId },
    Guard { src: NodeId, dst: NodeId },
}

impl fmt::Display for SlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotKind::BeaconTx => write!(f, "BT"),
            SlotKind::BeaconInterval => write!(f, "BI"),
            SlotKind::Info { src, dst } => write!(f, "U{src}{dst}"),
            SlotKind::Guard { src, dst } => write!(f, "G{src}{dst}"),
        }
    }
}

/// Position of ordered pair `(i, j)` in the per-period slot sequence:
/// `(i-1)(N-1) + (j-1)` when `j < i`, `(i-1)(N-1) + (j-2)` when `j > i`.
/// A bijection onto `[0, N(N-1))`.
pub fn ordered_pair_index(i: NodeId, j: NodeId, n: u32) -> Result<u64, MacError> {
    let (iv, jv) = (i.0, j.0);
    if iv == jv || iv < 1 || jv < 1 || iv > n || jv > n {
        return Err(MacError::InvalidPair { i: iv, j: jv, n });
    }
    let base = u64::from(iv - 1) * u64::from(n - 1);
    let off = if jv < iv { jv - 1 } else { jv - 2 };
    Ok(base + u64::from(off))
}

/// Inverse of [`ordered_pair_index`].
pub fn pair_from_index(idx: u64, n: u32) -> (NodeId, NodeId) {
    debug_assert!(idx < u64::from(n) * u64::from(n - 1));
    let i = (idx / u64::from(n - 1)) as u32 + 1;
    let r = (idx % u64::from(n - 1)) as u32;
    let j = if r + 1 < i { r + 1 } else { r + 2 };
    (NodeId(i), NodeId(j))
}

/// Closed-form inverse of the slot-transition equations: the unique slot
/// whose `[start, end)` interval contains the counter value. The period
/// length is the table's own total; the period-identity validator checks
/// that it equals `C_max`.
pub fn slot_at(counter_ticks: u64, table: &SlotTable, role: Role) -> Result<SlotKind, MacError> {
    let period = table.total_ticks();
    if counter_ticks >= period {
        return Err(MacError::CounterOutOfRange { ticks: counter_ticks, period });
    }
    if counter_ticks < table.beacon_tx_ticks() {
        return Ok(match role {
            Role::Master => SlotKind::BeaconTx,
            // Slaves have no BT slot; the whole leading region is their
            // beacon interval.
            Role::Slave => SlotKind::BeaconInterval,
        });
    }
    if counter_ticks < table.beacon_region_ticks() {
        return Ok(SlotKind::BeaconInterval);
    }
    let rel = counter_ticks - table.beacon_region_ticks();
    let cycle = table.slot_cycle_ticks();
    let idx = rel / cycle;
    let within = rel % cycle;
    let (src, dst) = pair_from_index(idx, table.node_count());
    if within < table.info_ticks() {
        Ok(SlotKind::Info { src, dst })
    } else {
        Ok(SlotKind::Guard { src, dst })
    }
}

/// Fully materialised slot timeline of one period for one role:
/// `(start_tick, kind)` in increasing order, gap-free from 0 to the period
/// length. Construction asserts totality — every tick belongs to exactly
/// one slot.
#[derive(Debug, Clone)]
pub struct Schedule {
    slots: Vec<(u64, SlotKind)>,
    total_ticks: u64,
}

impl Schedule {
    pub fn build(table: &SlotTable, role: Role) -> Self {
        let mut slots = Vec::new();
        match role {
            Role::Master => {
                slots.push((0, SlotKind::BeaconTx));
                slots.push((table.beacon_tx_ticks(), SlotKind::BeaconInterval));
            }
            Role::Slave => slots.push((0, SlotKind::BeaconInterval)),
        }
        let base = table.beacon_region_ticks();
        let cycle = table.slot_cycle_ticks();
        for idx in 0..table.pair_count() {
            let (src, dst) = pair_from_index(idx, table.node_count());
            slots.push((base + idx * cycle, SlotKind::Info { src, dst }));
            if table.guard_symbols() > 0 {
                slots.push((base + idx * cycle + table.info_ticks(), SlotKind::Guard { src, dst }));
            }
        }
        let total_ticks = table.total_ticks();
        debug_assert!(slots.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert_eq!(slots[0].0, 0);
        Self { slots, total_ticks }
    }

    pub fn slots(&self) -> &[(u64, SlotKind)] {
        &self.slots
    }

    pub fn total_ticks(&self) -> u64 {
        self.total_ticks
    }

    /// Slot interval `[start, end)` by position.
    pub fn interval(&self, idx: usize) -> (u64, u64) {
        let start = self.slots[idx].0;
        let end = self.slots.get(idx + 1).map_or(self.total_ticks, |s| s.0);
        (start, end)
    }

    pub fn kind_at(&self, tick: u64) -> SlotKind {
        debug_assert!(tick < self.total_ticks);
        let pos = self.slots.partition_point(|&(start, _)| start <= tick);
        self.slots[pos - 1].1
    }
}

/// Protocol state of one node: its counter, the slot it believes it is in,
/// and (for slaves) whether it decoded a beacon in the current period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeState {
    id: NodeId,
    counter: TimeCounter,
    current: SlotKind,
    synced: bool,
}

/// Input events for one state-machine step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeEvent {
    /// The slave's correlator found the beacon; reload to `c_initial`.
    BeaconDecoded,
}

/// Side effects a step asks the node's radio to perform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    StartBeacon,
    StopBeacon,
    StartTx { dst: NodeId },
    StopTx,
    Listen,
}

impl NodeState {
    pub fn new_master() -> Self {
        Self {
            id: NodeId::MASTER,
            counter: TimeCounter::new(Role::Master, 0),
            current: SlotKind::BeaconTx,
            synced: true,
        }
    }

    /// A slave starts unsynchronized, listening from counter zero.
    pub fn new_slave(id: NodeId) -> Self {
        debug_assert!(!id.is_master());
        Self {
            id,
            counter: TimeCounter::new(Role::Slave, 0),
            current: SlotKind::BeaconInterval,
            synced: false,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn role(&self) -> Role {
        self.counter.role()
    }

    pub fn counter_value(&self) -> u64 {
        self.counter.value()
    }

    pub fn current_slot(&self) -> SlotKind {
        self.current
    }

    pub fn is_synced(&self) -> bool {
        self.synced
    }
}

/// Advance one node one tick (or apply a beacon decode) and emit the
/// actions of whatever transition fires.
///
/// A beacon decode reloads the slave counter to `c_initial` and marks it
/// synchronized for the period. A slave that completes a whole period
/// without decoding loses synchronization and stops transmitting — an
/// unsynchronized slave never occupies an information slot as transmitter.
pub fn step_state_machine(
    state: &mut NodeState,
    table: &SlotTable,
    c_initial: u64,
    event: Option<NodeEvent>,
) -> Vec<Action> {
    let mut actions = Vec::new();
    let role = state.role();
    let previous = state.current;

    if role == Role::Slave && event == Some(NodeEvent::BeaconDecoded) {
        state.counter.reload(c_initial);
        state.synced = true;
    } else {
        let wrapped = state.counter.step(table.total_ticks());
        if wrapped && role == Role::Slave {
            // A full period elapsed without a beacon reload.
            state.synced = false;
        }
    }

    let next = slot_at(state.counter.value(), table, role)
        .expect("counter wraps within the period, slot lookup is total");
    state.current = next;
    if next == previous {
        return actions;
    }

    match previous {
        SlotKind::BeaconTx => actions.push(Action::StopBeacon),
        SlotKind::Info { src, .. } if src == state.id => actions.push(Action::StopTx),
        _ => {}
    }
    match next {
        SlotKind::BeaconTx => actions.push(Action::StartBeacon),
        SlotKind::BeaconInterval if role == Role::Slave => actions.push(Action::Listen),
        SlotKind::Info { src, dst } if src == state.id && state.synced => {
            actions.push(Action::StartTx { dst })
        }
        _ => {}
    }
    actions
}

/// One violated admissibility constraint. All margins are seconds.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotTableViolation {
    /// Beacon interval shorter than the worst-case decode latency
    /// (`t_bi >= max t_pro + t̃_ps`).
    BeaconIntervalTooShort { required_s: f64, actual_s: f64 },
    /// Claimed sync-error bound exceeds what the beacon interval absorbs
    /// (`t_d <= |t_bi − (max t_pro + t̃_ps)|`).
    SyncBudgetExceeded { bound_s: f64, budget_s: f64 },
    /// Guard interval shorter than the worst pairwise sync-error spread
    /// (`t_g >= |t_d(i) − t_d(j)|`, worst case `2 × bound`).
    GuardTooShort { required_s: f64, actual_s: f64 },
    /// Slot lengths do not add up to the synchronization period.
    PeriodMismatch { table_ticks: u64, c_max: u64 },
}

impl fmt::Display for SlotTableViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotTableViolation::BeaconIntervalTooShort { required_s, actual_s } => write!(
                f,
                "beacon interval {:.3e} s below required {:.3e} s",
                actual_s, required_s
            ),
            SlotTableViolation::SyncBudgetExceeded { bound_s, budget_s } => write!(
                f,
                "sync-error bound {:.3e} s exceeds beacon-interval budget {:.3e} s",
                bound_s, budget_s
            ),
            SlotTableViolation::GuardTooShort { required_s, actual_s } => write!(
                f,
                "guard interval {:.3e} s below required {:.3e} s",
                actual_s, required_s
            ),
            SlotTableViolation::PeriodMismatch { table_ticks, c_max } => write!(
                f,
                "slot lengths sum to {table_ticks} ticks but the period is {c_max} ticks"
            ),
        }
    }
}

/// Check the slot table against the delay model: beacon-interval length,
/// sync-error budget, guard sizing for a worst pairwise spread of
/// `2 × td_bound`, and the period identity. Violations are data, not
/// errors — an empty list means the table is admissible.
pub fn validate_slot_table(
    table: &SlotTable,
    clock: &ClockConfig,
    delays: &DelayModel,
    td_bound_s: f64,
) -> Vec<SlotTableViolation> {
    let mut violations = Vec::new();
    let symbol_s = table.symbol_ticks() as f64 * clock.tick_seconds();
    let t_bi_s = table.beacon_interval_symbols() as f64 * symbol_s;
    let t_g_s = table.guard_symbols() as f64 * symbol_s;
    let decode_latency = delays.max_t_pro_from_master() + delays.t_ps_tilde_s();

    if t_bi_s < decode_latency {
        violations.push(SlotTableViolation::BeaconIntervalTooShort {
            required_s: decode_latency,
            actual_s: t_bi_s,
        });
    }
    let budget = math::abs(t_bi_s - decode_latency);
    if td_bound_s > budget {
        violations.push(SlotTableViolation::SyncBudgetExceeded { bound_s: td_bound_s, budget_s: budget });
    }
    let guard_required = 2.0 * td_bound_s;
    if t_g_s < guard_required {
        violations.push(SlotTableViolation::GuardTooShort {
            required_s: guard_required,
            actual_s: t_g_s,
        });
    }
    if table.total_ticks() != clock.c_max() {
        violations.push(SlotTableViolation::PeriodMismatch {
            table_ticks: table.total_ticks(),
            c_max: clock.c_max(),
        });
    }
    violations
}
