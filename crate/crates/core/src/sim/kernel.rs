//! The period-by-period engine behind `run`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::beacon::{detect_beacon, BeaconSequence};
use crate::mac::frame::{build_frame, scan_frames};
use crate::mac::{pair_from_index, Schedule};
use crate::phy::{sample_poisson, LAMBDA_EPSILON};
use crate::rng::{SimRng, StreamPurpose};
use crate::timing::sync_error;
use crate::{math, NodeId, Role};

use super::metrics::{NodeMetrics, PairMetrics, RunMetrics, SyncSample, Throughput};
use super::{Event, EventKind, Fault, Scenario, SimError};

/// Decision rule shared by the live receivers and the beacon monitor:
/// maximum likelihood when a signal component is visible, all-zeros when
/// the two hypotheses coincide (no detectable signal).
fn detect(count: u64, lambda_s: f64, lambda_b: f64) -> bool {
    if lambda_s <= LAMBDA_EPSILON {
        return false;
    }
    if lambda_b <= LAMBDA_EPSILON {
        return count >= 1;
    }
    count as f64 * math::ln(1.0 + lambda_s / lambda_b) >= lambda_s
}

/// Known preamble pattern: alternating, starting with a one.
fn preamble_bit(k: usize) -> bool {
    k.is_multiple_of(2)
}

struct PairCounters {
    sent: u64,
    received: u64,
    correct: u64,
    lost_channel: u64,
    dropped_unsynced: u64,
    bit_errors: u64,
    bits_compared: u64,
    next_seq: u16,
}

pub(super) struct Kernel<'a> {
    sc: &'a Scenario,
    template: BeaconSequence,
    c_initial_ticks: u64,
    period_ticks: i64,
    sym_ticks: i64,
    tick_ns: f64,
    sym_ns: f64,
    chip_ns: f64,

    rng_noise: Vec<SimRng>,
    rng_tps: Vec<SimRng>,
    rng_payload: Vec<SimRng>,

    /// Slot-timing anchor per node for the current period: the absolute
    /// tick at which the node's counter reads zero. `None` = unsynced.
    anchors: Vec<Option<i64>>,
    /// Same, but without any injected clock-offset fault; drives the
    /// beacon acceptance prediction.
    sync_anchors: Vec<Option<i64>>,
    clock_offsets: Vec<i64>,

    pairs: Vec<PairCounters>,
    sync_samples: Vec<SyncSample>,
    tx_intervals: Vec<(i64, i64, NodeId)>,
    trace: Option<Vec<Event>>,
}

impl<'a> Kernel<'a> {
    pub(super) fn new(sc: &'a Scenario, trace: bool) -> Result<Self, SimError> {
        let template = sc.beacon_sequence()?;
        sc.base_means()?;
        let n = sc.node_count();
        let c_initial = sc.delays.c_initial(&sc.clock);
        let mut clock_offsets = vec![0i64; n as usize];
        for fault in &sc.faults {
            if let Fault::OffsetClock { node, ticks } = fault {
                clock_offsets[node.index()] += ticks;
            }
        }
        let pair_count = sc.slot_table.pair_count() as usize;
        Ok(Self {
            sc,
            template,
            c_initial_ticks: c_initial.ticks,
            period_ticks: sc.slot_table.total_ticks() as i64,
            sym_ticks: sc.slot_table.symbol_ticks() as i64,
            tick_ns: sc.clock.tick_ns() as f64,
            sym_ns: sc.symbol_ns() as f64,
            chip_ns: sc.symbol_ns() as f64 / f64::from(sc.beacon.chips_per_symbol),
            rng_noise: (1..=n).map(|i| sc.stream(NodeId(i), StreamPurpose::ReceiverNoise)).collect(),
            rng_tps: (1..=n).map(|i| sc.stream(NodeId(i), StreamPurpose::ProcessingDelay)).collect(),
            rng_payload: (1..=n).map(|i| sc.stream(NodeId(i), StreamPurpose::Payload)).collect(),
            anchors: vec![None; n as usize],
            sync_anchors: vec![None; n as usize],
            clock_offsets,
            pairs: (0..pair_count)
                .map(|_| PairCounters {
                    sent: 0,
                    received: 0,
                    correct: 0,
                    lost_channel: 0,
                    dropped_unsynced: 0,
                    bit_errors: 0,
                    bits_compared: 0,
                    next_seq: 0,
                })
                .collect(),
            sync_samples: Vec::new(),
            tx_intervals: Vec::new(),
            trace: trace.then(Vec::new),
        })
    }

    fn emit(&mut self, tick: i64, node: NodeId, kind: EventKind) {
        if let Some(t) = self.trace.as_mut() {
            t.push(Event { tick, node, kind });
        }
    }

    /// Effective per-symbol signal mean on `(src, dst)` through receiver
    /// gain `rgain`.
    fn lambda_eff(&self, src: NodeId, dst: NodeId, rgain: f64) -> f64 {
        self.sc.lambda_s_per_symbol * self.sc.link_gains[src.index()][dst.index()] * rgain
    }

    /// The receiver of `dst` used to decode transmissions from `src`:
    /// the designated aimed receiver, or the best-gain one under selection
    /// combining. `None` when nothing is aimed at `src`.
    fn receiver_gain(&self, src: NodeId, dst: NodeId) -> Option<f64> {
        let candidates = self.sc.receivers[dst.index()].iter().filter(|r| r.aim == src);
        if self.sc.traffic.selection_combining {
            candidates
                .map(|r| r.gain)
                .max_by(|a, b| a.partial_cmp(b).expect("finite gains"))
        } else {
            candidates.map(|r| r.gain).next()
        }
    }

    fn jam_mean_for_interval(&self, node: NodeId, start_tick: f64, end_tick: f64) -> f64 {
        let mut add = 0.0;
        for fault in &self.sc.faults {
            if let Fault::Jam { node: target, from_tick, to_tick, lambda_per_symbol } = fault {
                if *target == node {
                    let lo = start_tick.max(*from_tick as f64);
                    let hi = end_tick.min(*to_tick as f64);
                    if hi > lo {
                        add += lambda_per_symbol * (hi - lo)
                            / (self.sym_ns / self.tick_ns);
                    }
                }
            }
        }
        add
    }

    /// Generate the slave's chip window around the true beacon arrival.
    /// Chip-level events exist only here; everything else runs per symbol.
    /// Returns the window's first chip index on the global chip grid plus
    /// the sampled counts.
    fn beacon_window(
        &mut self,
        slave: NodeId,
        master_anchor: i64,
        dropped: bool,
        lambda_eff: f64,
    ) -> (i64, Vec<u64>, f64) {
        let m = self.sc.beacon.chips_per_symbol as usize;
        let l = self.template.len();
        let arrival_ns = master_anchor as f64 * self.tick_ns
            + self.sc.delays.t_pro_from_master(slave) * 1e9;
        let g0 = math::floor(arrival_ns / self.chip_ns) as i64 - m as i64;
        let window_len = l * m + 2 * m;
        let lambda_b = self.sc.lambda_b_per_symbol;
        let chip_bg = lambda_b / m as f64;

        let mut counts = Vec::with_capacity(window_len);
        for c in 0..window_len {
            let a_ns = (g0 + c as i64) as f64 * self.chip_ns;
            let b_ns = a_ns + self.chip_ns;
            let mut mean = chip_bg
                + self.jam_mean_for_interval(slave, a_ns / self.tick_ns, b_ns / self.tick_ns);
            if !dropped && lambda_eff > LAMBDA_EPSILON {
                // A chip overlaps at most two beacon symbols.
                let rel = a_ns - arrival_ns;
                let k0 = math::floor(rel / self.sym_ns) as i64;
                for k in [k0, k0 + 1] {
                    if k < 0 || k >= l as i64 {
                        continue;
                    }
                    if !self.template.bits()[k as usize] {
                        continue;
                    }
                    let sym_a = arrival_ns + k as f64 * self.sym_ns;
                    let sym_b = sym_a + self.sym_ns;
                    let overlap = (b_ns.min(sym_b) - a_ns.max(sym_a)).max(0.0);
                    mean += lambda_eff * overlap / self.sym_ns;
                }
            }
            counts.push(sample_poisson(mean, &mut self.rng_noise[slave.index()]));
        }
        (g0, counts, arrival_ns)
    }

    /// Instrument-level link-quality measurement on the beacon span:
    /// symbol counts at the true alignment, detected with the true means,
    /// compared against the transmitted sequence.
    fn monitor_beacon(
        &mut self,
        slave: NodeId,
        window: &[u64],
        g0: i64,
        arrival_ns: f64,
        lambda_eff: f64,
    ) {
        let m = self.sc.beacon.chips_per_symbol as usize;
        let true_start = math::round((arrival_ns - g0 as f64 * self.chip_ns) / self.chip_ns) as usize;
        let lambda_b = self.sc.lambda_b_per_symbol;
        let pair_idx = crate::mac::ordered_pair_index(NodeId::MASTER, slave, self.sc.node_count())
            .expect("master-slave pair") as usize;
        for (k, &bit) in self.template.bits().iter().enumerate() {
            let start = true_start + k * m;
            let count: u64 = window[start..start + m].iter().sum();
            let decided = detect(count, lambda_eff, lambda_b);
            self.pairs[pair_idx].bits_compared += 1;
            if decided != bit {
                self.pairs[pair_idx].bit_errors += 1;
            }
        }
    }

    /// Per-slot channel estimate from the known alternating preamble.
    fn estimate_means(
        &self,
        counts: &[u64],
        m_lo: i64,
        lambda_eff: f64,
        lambda_b: f64,
    ) -> (f64, f64) {
        if self.sc.traffic.genie_channel_estimate {
            return (lambda_eff, lambda_b);
        }
        let preamble = self.sc.traffic.preamble_symbols as i64;
        let (mut on_sum, mut on_n, mut off_sum, mut off_n) = (0u64, 0u64, 0u64, 0u64);
        for (pos, &c) in counts.iter().enumerate() {
            let sym = m_lo + pos as i64;
            if sym >= preamble {
                break;
            }
            if preamble_bit(sym as usize) {
                on_sum += c;
                on_n += 1;
            } else {
                off_sum += c;
                off_n += 1;
            }
        }
        if on_n == 0 || off_n == 0 {
            return (0.0, 0.0);
        }
        let on = on_sum as f64 / on_n as f64;
        let off = off_sum as f64 / off_n as f64;
        ((on - off).max(0.0), off.max(0.0))
    }

    /// Transmit one information slot's worth of frames on `(src, dst)` and
    /// run the receiver chain. Returns the number of symbols emitted.
    #[allow(clippy::too_many_arguments)]
    fn data_slot(
        &mut self,
        pair_idx: usize,
        src: NodeId,
        dst: NodeId,
        nframes: u64,
        anchor_src: i64,
        anchor_dst: i64,
        rgain: Option<f64>,
    ) -> u64 {
        let payload_bits = self.sc.traffic.payload_bits;
        let preamble = self.sc.traffic.preamble_symbols;

        // Transmitted symbol stream: preamble then back-to-back frames.
        let mut tx_bits: Vec<bool> = (0..preamble).map(preamble_bit).collect();
        for _ in 0..nframes {
            let payload: Vec<bool> = {
                let rng = &mut self.rng_payload[src.index()];
                (0..payload_bits).map(|_| rng.random()).collect()
            };
            let seq = self.pairs[pair_idx].next_seq;
            self.pairs[pair_idx].next_seq = seq.wrapping_add(1);
            tx_bits.extend(build_frame(&payload, seq));
        }
        let used = tx_bits.len() as i64;

        let u_start = self
            .sc
            .slot_table
            .info_start_tick(src, dst)
            .expect("valid pair") as i64;
        let tx_start = anchor_src + u_start;
        let tx_end = tx_start + used * self.sym_ticks;
        // Overlap accounting is about slot occupancy: guard sizing absorbs
        // boundary misalignment of the slots nodes hold, regardless of how
        // much payload each slot carries.
        self.tx_intervals
            .push((tx_start, tx_start + self.sc.slot_table.info_ticks() as i64, src));
        self.emit(tx_start, src, EventKind::TxStart { dst, frames: nframes });
        self.emit(tx_end, src, EventKind::TxEnd { dst });
        self.pairs[pair_idx].sent += nframes;

        let Some(rgain) = rgain else {
            // Transmitted into the void: no receiver covers this link.
            self.pairs[pair_idx].lost_channel += nframes;
            return used as u64;
        };

        // Receiver side: symbol-timing recovery locks the sampler to the
        // incoming stream; the listen window (the receiver's own notion of
        // the slot) clips which symbols are visible.
        let win_start = anchor_dst + u_start;
        let win_end = win_start + self.sc.slot_table.info_ticks() as i64;
        let pro_ticks =
            math::round(self.sc.delays.t_pro_between(src, dst) * 1e9 / self.tick_ns) as i64;
        let arr = tx_start + pro_ticks;
        let s = self.sym_ticks;
        // ceil((win_start - arr) / s), clamped into the emitted span.
        let m_lo = (-(arr - win_start).div_euclid(s)).max(0);
        let m_hi = ((win_end - arr).div_euclid(s)).min(used);
        if m_hi <= m_lo {
            self.pairs[pair_idx].lost_channel += nframes;
            return used as u64;
        }

        let lambda_eff = self.lambda_eff(src, dst, rgain);
        let lambda_b = self.sc.lambda_b_per_symbol;
        let mut counts = Vec::with_capacity((m_hi - m_lo) as usize);
        for sym in m_lo..m_hi {
            let sym_start = (arr + sym * s) as f64;
            let mut mean = if tx_bits[sym as usize] { lambda_eff } else { 0.0 } + lambda_b;
            mean += self.jam_mean_for_interval(dst, sym_start, sym_start + s as f64);
            counts.push(sample_poisson(mean, &mut self.rng_noise[dst.index()]));
        }

        let (est_s, est_b) = self.estimate_means(&counts, m_lo, lambda_eff, lambda_b);
        let detected: Vec<bool> = counts.iter().map(|&c| detect(c, est_s, est_b)).collect();

        // Link-quality accounting over the data region.
        for (pos, &bit) in detected.iter().enumerate() {
            let sym = m_lo + pos as i64;
            if (sym as usize) < preamble {
                continue;
            }
            self.pairs[pair_idx].bits_compared += 1;
            if bit != tx_bits[sym as usize] {
                self.pairs[pair_idx].bit_errors += 1;
            }
        }

        let scan = scan_frames(&detected, payload_bits);
        self.pairs[pair_idx].received += scan.received;
        self.pairs[pair_idx].correct += scan.correct;
        self.pairs[pair_idx].lost_channel += nframes.saturating_sub(scan.received);
        used as u64
    }

    fn count_overlaps(&mut self) -> u64 {
        let mut intervals = core::mem::take(&mut self.tx_intervals);
        intervals.sort_unstable_by_key(|&(start, end, node)| (start, end, node.0));
        let mut events = 0u64;
        let mut pending: Vec<(i64, i64, NodeId)> = Vec::new();
        for &(start, end, node) in &intervals {
            pending.retain(|&(_, pend, _)| pend > start);
            for &(pstart, _, pnode) in &pending {
                if pnode != node {
                    events += 1;
                    self.emit(start.max(pstart), node, EventKind::Overlap { other: pnode });
                }
            }
            pending.push((start, end, node));
        }
        self.tx_intervals = intervals;
        events
    }

    pub(super) fn run(mut self) -> Result<(RunMetrics, Option<Vec<Event>>), SimError> {
        let sc = self.sc;
        let n = sc.node_count();
        let quota = sc.traffic.frames_per_pair;
        let capacity = sc.slot_frame_capacity();
        let planned = sc.planned_periods();
        let beacon_region = sc.slot_table.beacon_region_ticks();
        let master_gain_to = |s: NodeId, k: &Kernel| -> f64 {
            k.receiver_gain(NodeId::MASTER, s)
                .map_or(0.0, |g| k.lambda_eff(NodeId::MASTER, s, g))
        };

        let mut periods_run = 0u64;
        for period in 0..planned {
            periods_run = period + 1;
            let master_anchor = period as i64 * self.period_ticks;
            self.anchors[0] = Some(master_anchor);
            self.sync_anchors[0] = Some(master_anchor);
            let dropped = sc
                .faults
                .iter()
                .any(|f| matches!(f, Fault::DropBeacon { period: p } if *p == period));

            if !dropped {
                let bt_end = master_anchor + sc.slot_table.beacon_tx_ticks() as i64;
                self.tx_intervals.push((master_anchor, bt_end, NodeId::MASTER));
            }

            // Beacon reception and resynchronization, slave by slave.
            for s in 2..=n {
                let slave = NodeId(s);
                let lambda_eff = master_gain_to(slave, &self);
                let (g0, window, arrival_ns) =
                    self.beacon_window(slave, master_anchor, dropped, lambda_eff);

                let detection = detect_beacon(
                    &window,
                    &self.template,
                    sc.beacon.chips_per_symbol,
                    sc.beacon.threshold_ratio,
                )?;

                let prev_sync = self.sync_anchors[slave.index()];
                let mut new_anchor = None;
                if let Some(det) = detection {
                    let beacon_start_ns = (g0 + det.chip_offset as i64) as f64 * self.chip_ns;
                    let t_ps = sc.delays.t_ps().sample(&mut self.rng_tps[slave.index()]);
                    let pulse_ns =
                        beacon_start_ns + sc.delays.t_trans_s() * 1e9 + t_ps * 1e9;
                    let pulse_tick = math::round(pulse_ns / self.tick_ns) as i64;

                    // Reloads are accepted only inside the slave's own
                    // BT+BI window; anything else is a stray peak.
                    let accept = match prev_sync {
                        None => true,
                        Some(prev) => {
                            let counter = pulse_tick - (prev + self.period_ticks);
                            counter >= 0 && (counter as u64) < beacon_region
                        }
                    };
                    if accept {
                        let sync_anchor = pulse_tick - self.c_initial_ticks as i64;
                        new_anchor = Some(sync_anchor);
                        let decode_tick = math::round(
                            (g0 + det.chip_offset as i64) as f64 * self.chip_ns / self.tick_ns,
                        ) as i64;
                        self.emit(
                            decode_tick,
                            slave,
                            EventKind::BeaconDecode { window_chip_offset: det.chip_offset },
                        );
                        self.emit(pulse_tick, slave, EventKind::CounterReload {
                            value: self.c_initial_ticks,
                        });
                        self.sync_samples.push(SyncSample {
                            round: period,
                            node: slave,
                            pre_s: sc.delays.t_trans_s()
                                + sc.delays.t_pro_from_master(slave)
                                + t_ps,
                            post_s: sync_error(slave, t_ps, &sc.delays),
                        });
                    } else {
                        self.emit(pulse_tick, slave, EventKind::LateBeaconIgnored);
                    }
                }
                self.sync_anchors[slave.index()] = new_anchor;
                self.anchors[slave.index()] =
                    new_anchor.map(|a| a + self.clock_offsets[slave.index()]);

                // Instrument the link whenever a beacon was on the air,
                // even with zero received signal: a dead link reads as
                // chance-level BER, not as an absence of data.
                if !dropped {
                    self.monitor_beacon(slave, &window, g0, arrival_ns, lambda_eff);
                }
            }

            // Slot-transition trace for every synchronized node.
            if self.trace.is_some() {
                for id in 1..=n {
                    let node = NodeId(id);
                    if let Some(anchor) = self.anchors[node.index()] {
                        let schedule = Schedule::build(&sc.slot_table, Role::of(node));
                        for &(start, kind) in schedule.slots() {
                            self.emit(anchor + start as i64, node, EventKind::SlotTransition {
                                to: kind,
                            });
                        }
                    }
                }
            }

            // Information slots in schedule order. A pair carries traffic
            // only when both ends hold a synchronized counter this period.
            for idx in 0..sc.slot_table.pair_count() {
                let (src, dst) = pair_from_index(idx, n);
                let pair_idx = idx as usize;
                let remaining = quota.saturating_sub(self.pairs[pair_idx].sent);
                if remaining == 0 {
                    continue;
                }
                let (Some(a_src), Some(a_dst)) =
                    (self.anchors[src.index()], self.anchors[dst.index()])
                else {
                    continue;
                };
                let nframes = remaining.min(capacity);
                if nframes == 0 {
                    continue;
                }
                let rgain = self.receiver_gain(src, dst);
                self.data_slot(pair_idx, src, dst, nframes, a_src, a_dst, rgain);
            }

            if self.pairs.iter().all(|p| p.sent >= quota) {
                break;
            }
        }

        let overlap_events = self.count_overlaps();
        let sim_seconds =
            periods_run as f64 * self.period_ticks as f64 * sc.clock.tick_seconds();

        // Assemble metrics.
        let mut per_pair = Vec::with_capacity(self.pairs.len());
        for (idx, c) in self.pairs.iter().enumerate() {
            let (src, dst) = pair_from_index(idx as u64, n);
            per_pair.push(PairMetrics {
                src,
                dst,
                sent: c.sent,
                received: c.received,
                correct: c.correct,
                lost_channel: c.lost_channel,
                dropped_unsynced: c.dropped_unsynced,
                bit_errors: c.bit_errors,
                bits_compared: c.bits_compared,
            });
        }
        let payload = sc.traffic.payload_bits as f64;
        let per_node: Vec<NodeMetrics> = (1..=n)
            .map(|id| {
                let node = NodeId(id);
                let incoming = per_pair.iter().filter(|p| p.dst == node);
                let (mut rx, mut ok, mut errs, mut cmp) = (0u64, 0u64, 0u64, 0u64);
                for p in incoming {
                    rx += p.received;
                    ok += p.correct;
                    errs += p.bit_errors;
                    cmp += p.bits_compared;
                }
                NodeMetrics {
                    node,
                    frame_receive_num: rx,
                    frame_correct_num: ok,
                    bit_errors: errs,
                    bits_compared: cmp,
                    goodput_bps: ok as f64 * payload / sim_seconds,
                }
            })
            .collect();

        let period_s = self.period_ticks as f64 * sc.clock.tick_seconds();
        let info_bits_per_period = sc.slot_table.info_symbols() as f64;
        let throughput = Throughput {
            raw_aggregate_bps: sc.slot_table.pair_count() as f64 * info_bits_per_period / period_s,
            per_node_bps: f64::from(n - 1) * info_bits_per_period / period_s,
            goodput_bps: per_node.iter().map(|m| m.frame_correct_num).sum::<u64>() as f64
                * payload
                / sim_seconds,
        };

        let mut trace = self.trace.take();
        if let Some(t) = trace.as_mut() {
            t.sort_by_key(|e| (e.tick, e.node.0, e.kind.rank()));
        }

        let metrics = RunMetrics {
            per_pair,
            per_node,
            sync_samples: self.sync_samples,
            overlap_events,
            periods: periods_run,
            sim_seconds,
            throughput,
            notes: sc.notes.clone(),
        };
        Ok((metrics, trace))
    }
}
