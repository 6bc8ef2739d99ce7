//! Run outputs: per-pair and per-node frame accounting, sync-error
//! samples, overlap counts, and throughput.

use alloc::string::String;
use alloc::vec::Vec;

use crate::NodeId;

/// One synchronization measurement: the uncompensated delay a slave would
/// exhibit if it loaded its counter with zero, and the residual error after
/// compensation. Both in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncSample {
    /// Beacon round (period or trial index, zero-based).
    pub round: u64,
    pub node: NodeId,
    /// `t_trans + t_pro + t_ps` for this round.
    pub pre_s: f64,
    /// `(t̃_ps − t_ps) + (max t_pro − t_pro)` for this round.
    pub post_s: f64,
}

/// Frame accounting for one ordered pair. Conservation holds by
/// construction: `sent = received + lost_channel + dropped_unsynced`
/// (received counts sync-word matches whether or not the checksum passed).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairMetrics {
    pub src: NodeId,
    pub dst: NodeId,
    pub sent: u64,
    pub received: u64,
    pub correct: u64,
    pub lost_channel: u64,
    pub dropped_unsynced: u64,
    /// Symbol decisions compared against the transmitted stream (data
    /// slots plus the beacon monitor for master links).
    pub bit_errors: u64,
    pub bits_compared: u64,
}

impl PairMetrics {
    pub fn ber(&self) -> f64 {
        if self.bits_compared == 0 {
            f64::NAN
        } else {
            self.bit_errors as f64 / self.bits_compared as f64
        }
    }
}

/// Receiver-side totals for one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeMetrics {
    pub node: NodeId,
    pub frame_receive_num: u64,
    pub frame_correct_num: u64,
    pub bit_errors: u64,
    pub bits_compared: u64,
    /// Correct payload bits per simulated second.
    pub goodput_bps: f64,
}

impl NodeMetrics {
    pub fn ber(&self) -> f64 {
        if self.bits_compared == 0 {
            f64::NAN
        } else {
            self.bit_errors as f64 / self.bits_compared as f64
        }
    }
}

/// Capacity and goodput accounting for the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Throughput {
    /// Info-slot bits per second summed over all ordered pairs.
    pub raw_aggregate_bps: f64,
    /// Info-slot bits per second available to one transmitter.
    pub per_node_bps: f64,
    /// Correct payload bits per second, network-wide.
    pub goodput_bps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub per_pair: Vec<PairMetrics>,
    pub per_node: Vec<NodeMetrics>,
    pub sync_samples: Vec<SyncSample>,
    /// Distinct pairs of transmissions from different nodes that
    /// intersected in absolute time.
    pub overlap_events: u64,
    pub periods: u64,
    pub sim_seconds: f64,
    pub throughput: Throughput,
    /// Free-form provenance and accounting notes carried from the
    /// scenario plus throughput flags computed by the run.
    pub notes: Vec<String>,
}

impl RunMetrics {
    pub fn pair(&self, src: NodeId, dst: NodeId) -> Option<&PairMetrics> {
        self.per_pair.iter().find(|p| p.src == src && p.dst == dst)
    }

    pub fn node(&self, node: NodeId) -> Option<&NodeMetrics> {
        self.per_node.iter().find(|n| n.node == node)
    }
}
