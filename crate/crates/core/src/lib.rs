//! Simulator core for a beacon-synchronized TDMA optical scattering network.
//!
//! One master node broadcasts a periodic m-sequence beacon; slave nodes
//! recover the period start by chip-level counting correlation, compensate
//! the known transmission/propagation/processing delays, and then follow a
//! fixed TDMA schedule of information and guard slots. The physical layer is
//! a discrete-time Poisson photon-counting channel with OOK modulation.
//!
//! The crate is organised around the pipeline stages:
//!
//! - [`phy`] — Poisson symbol/chip statistics, sampling, ML symbol detection
//! - [`beacon`] — m-sequence generation and counting-based correlation
//! - [`timing`] — delay decomposition, counters, compensation, sync error
//! - [`mac`] — slot tables, slot-transition state machines, admissibility
//!   checks, and the frame format
//! - [`sim`] — the deterministic event kernel binding everything into
//!   multi-node scenario runs with metrics
//! - [`presets`] — ready-made scenarios used by the CLI and the test suite
//!
//! Everything is deterministic given a scenario seed: each `(node, purpose)`
//! pair owns a named RNG substream (see [`rng`]), so adding a node or a
//! metric never perturbs the draws seen by the rest of the system.
//!
//! The crate is `no_std`-compatible (`alloc` required): disable default
//! features and enable `libm` for float math on targets without `std`.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("uvtdma-core needs either the `std` or the `libm` feature for float math");

pub mod beacon;
pub mod mac;
mod math;
pub mod phy;
pub mod presets;
pub mod rng;
pub mod sim;
pub mod timing;

use core::fmt;

/// 1-based node identifier. The master is always `NodeId(1)`; slaves are
/// `2..=N`. Keeping the protocol's 1-based numbering avoids a translation
/// layer between the schedule arithmetic and the code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const MASTER: NodeId = NodeId(1);

    /// Zero-based index for container lookups.
    pub fn index(self) -> usize {
        debug_assert!(self.0 >= 1, "NodeId is 1-based");
        (self.0 - 1) as usize
    }

    pub fn is_master(self) -> bool {
        self == Self::MASTER
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Role of a node in the master/slave structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Master,
    Slave,
}

impl Role {
    pub fn of(id: NodeId) -> Role {
        if id.is_master() {
            Role::Master
        } else {
            Role::Slave
        }
    }
}
