//! Delay decomposition, time counters, and compensation.
//!
//! The latency between the master starting a beacon and a slave raising its
//! sync pulse decomposes into three parts: the transmission delay
//! `t_trans = L × T_s` (the beacon must be fully received before the
//! correlation peak exists), the propagation delay `r / c`, and a random
//! per-event processing delay. A slave therefore loads its counter with a
//! compensated initial value instead of zero:
//!
//! `c_initial = (t_trans + max_j t_pro(1,j) + t̃_ps) / t_clock`
//!
//! where `t̃_ps` is the calibrated processing-delay constant. The residual
//! synchronization error of slave `i` is then
//!
//! `t_d(i) = (t̃_ps − t_ps) + (max_j t_pro(1,j) − t_pro(1,i))`
//!
//! and exactly zero for the master itself.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::math;
use crate::rng::SimRng;
use crate::{NodeId, Role};

pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq)]
pub enum TimingError {
    /// Tick or period of zero, or a period not divisible by the tick.
    InvalidClock { tick_ns: u64, period_ns: u64 },
    /// Propagation distance must be strictly positive.
    InvalidDistance(f64),
    /// Distribution descriptor with invalid parameters.
    InvalidDistribution,
    /// Node positions must be pairwise distinct.
    CoincidentNodes(usize, usize),
}

impl fmt::Display for TimingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimingError::InvalidClock { tick_ns, period_ns } => {
                write!(f, "period {period_ns} ns is not a positive multiple of tick {tick_ns} ns")
            }
            TimingError::InvalidDistance(d) => write!(f, "invalid propagation distance {d} m"),
            TimingError::InvalidDistribution => write!(f, "invalid delay distribution"),
            TimingError::CoincidentNodes(a, b) => {
                write!(f, "nodes {a} and {b} occupy the same position")
            }
        }
    }
}

impl core::error::Error for TimingError {}

/// Counter clock: tick length and synchronization period, both integer
/// nanoseconds so that `C_max × t_clock = T` holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClockConfig {
    tick_ns: u64,
    period_ns: u64,
}

impl ClockConfig {
    pub fn new(tick_ns: u64, period_ns: u64) -> Result<Self, TimingError> {
        if tick_ns == 0 || period_ns == 0 || !period_ns.is_multiple_of(tick_ns) {
            return Err(TimingError::InvalidClock { tick_ns, period_ns });
        }
        Ok(Self { tick_ns, period_ns })
    }

    pub fn tick_ns(&self) -> u64 {
        self.tick_ns
    }

    pub fn period_ns(&self) -> u64 {
        self.period_ns
    }

    /// Ticks per synchronization period.
    pub fn c_max(&self) -> u64 {
        self.period_ns / self.tick_ns
    }

    pub fn tick_seconds(&self) -> f64 {
        self.tick_ns as f64 * 1e-9
    }

    pub fn period_seconds(&self) -> f64 {
        self.period_ns as f64 * 1e-9
    }
}

/// Family of the per-event processing-delay distribution. All values are
/// seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayDistribution {
    /// Degenerate: every sample equals `value_s`.
    Constant { value_s: f64 },
    /// Uniform on `[lo_s, hi_s)`.
    Uniform { lo_s: f64, hi_s: f64 },
    /// Normal with location `mean_s` and scale `sd_s`, rejected outside
    /// `[lo_s, hi_s]`. The realized mean/sd differ from the location/scale
    /// when the window is asymmetric; `mean()`/`sd()` report the realized
    /// moments.
    TruncatedNormal { mean_s: f64, sd_s: f64, lo_s: f64, hi_s: f64 },
}

impl DelayDistribution {
    pub fn validate(&self) -> Result<(), TimingError> {
        match *self {
            DelayDistribution::Constant { value_s } => {
                if !value_s.is_finite() || value_s < 0.0 {
                    return Err(TimingError::InvalidDistribution);
                }
            }
            DelayDistribution::Uniform { lo_s, hi_s } => {
                if !lo_s.is_finite() || !hi_s.is_finite() || lo_s < 0.0 || hi_s <= lo_s {
                    return Err(TimingError::InvalidDistribution);
                }
            }
            DelayDistribution::TruncatedNormal { mean_s, sd_s, lo_s, hi_s } => {
                if !mean_s.is_finite()
                    || !sd_s.is_finite()
                    || sd_s <= 0.0
                    || lo_s < 0.0
                    || hi_s <= lo_s
                {
                    return Err(TimingError::InvalidDistribution);
                }
                // Guard the rejection sampler against windows the base
                // normal essentially never visits.
                let alpha = (lo_s - mean_s) / sd_s;
                let beta = (hi_s - mean_s) / sd_s;
                if math::normal_cdf(beta) - math::normal_cdf(alpha) < 1e-9 {
                    return Err(TimingError::InvalidDistribution);
                }
            }
        }
        Ok(())
    }

    /// Realized mean of the distribution (truncation-aware).
    pub fn mean(&self) -> f64 {
        match *self {
            DelayDistribution::Constant { value_s } => value_s,
            DelayDistribution::Uniform { lo_s, hi_s } => 0.5 * (lo_s + hi_s),
            DelayDistribution::TruncatedNormal { mean_s, sd_s, lo_s, hi_s } => {
                let (m, _) = truncated_normal_moments(mean_s, sd_s, lo_s, hi_s);
                m
            }
        }
    }

    /// Realized standard deviation (truncation-aware).
    pub fn sd(&self) -> f64 {
        match *self {
            DelayDistribution::Constant { .. } => 0.0,
            DelayDistribution::Uniform { lo_s, hi_s } => {
                (hi_s - lo_s) / math::sqrt(12.0)
            }
            DelayDistribution::TruncatedNormal { mean_s, sd_s, lo_s, hi_s } => {
                let (_, sd) = truncated_normal_moments(mean_s, sd_s, lo_s, hi_s);
                sd
            }
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        match *self {
            DelayDistribution::Constant { value_s } => value_s,
            DelayDistribution::Uniform { lo_s, hi_s } => {
                lo_s + (hi_s - lo_s) * rng.random::<f64>()
            }
            DelayDistribution::TruncatedNormal { mean_s, sd_s, lo_s, hi_s } => loop {
                let x = mean_s + sd_s * sample_standard_normal(rng);
                if x >= lo_s && x <= hi_s {
                    return x;
                }
            },
        }
    }
}

fn truncated_normal_moments(mu: f64, sd: f64, lo: f64, hi: f64) -> (f64, f64) {
    let alpha = (lo - mu) / sd;
    let beta = (hi - mu) / sd;
    let z = math::normal_cdf(beta) - math::normal_cdf(alpha);
    let pa = math::normal_pdf(alpha);
    let pb = math::normal_pdf(beta);
    let mean = mu + sd * (pa - pb) / z;
    let var = sd * sd * (1.0 + (alpha * pa - beta * pb) / z - ((pa - pb) / z) * ((pa - pb) / z));
    (mean, math::sqrt(var.max(0.0)))
}

/// Marsaglia polar method; consumes a variable number of uniforms but is
/// deterministic for a given stream.
fn sample_standard_normal(rng: &mut SimRng) -> f64 {
    loop {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * math::sqrt(-2.0 * math::ln(s) / s);
        }
    }
}

/// The complete delay picture of a deployment: beacon transmission delay,
/// pairwise propagation, the processing-delay distribution, and the
/// calibrated compensation constant.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayModel {
    t_trans_s: f64,
    /// Symmetric matrix, zero diagonal, entries `distance / c`.
    t_pro_s: Vec<Vec<f64>>,
    t_ps: DelayDistribution,
    t_ps_tilde_s: f64,
}

impl DelayModel {
    pub fn from_positions(
        t_trans_s: f64,
        positions_m: &[(f64, f64)],
        t_ps: DelayDistribution,
        t_ps_tilde_s: f64,
    ) -> Result<Self, TimingError> {
        t_ps.validate()?;
        let n = positions_m.len();
        let mut t_pro_s = alloc::vec![alloc::vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = positions_m[i].0 - positions_m[j].0;
                let dy = positions_m[i].1 - positions_m[j].1;
                let d = math::sqrt(dx * dx + dy * dy);
                if d <= 0.0 {
                    return Err(TimingError::CoincidentNodes(i, j));
                }
                let t = compute_t_pro(d)?;
                t_pro_s[i][j] = t;
                t_pro_s[j][i] = t;
            }
        }
        Ok(Self { t_trans_s, t_pro_s, t_ps, t_ps_tilde_s })
    }

    pub fn node_count(&self) -> usize {
        self.t_pro_s.len()
    }

    pub fn t_trans_s(&self) -> f64 {
        self.t_trans_s
    }

    pub fn t_ps(&self) -> &DelayDistribution {
        &self.t_ps
    }

    pub fn t_ps_tilde_s(&self) -> f64 {
        self.t_ps_tilde_s
    }

    /// Propagation delay between two nodes.
    pub fn t_pro_between(&self, a: NodeId, b: NodeId) -> f64 {
        self.t_pro_s[a.index()][b.index()]
    }

    /// Propagation delay from the master to `node`.
    pub fn t_pro_from_master(&self, node: NodeId) -> f64 {
        self.t_pro_between(NodeId::MASTER, node)
    }

    /// `max_j t_pro(1, j)` — the farthest slave's propagation delay.
    pub fn max_t_pro_from_master(&self) -> f64 {
        self.t_pro_s[0]
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    /// The slave whose distance to the master attains the maximum.
    pub fn farthest_slave(&self) -> NodeId {
        let row = &self.t_pro_s[0];
        let mut best = 1usize;
        for (idx, &t) in row.iter().enumerate().skip(1) {
            if t > row[best] {
                best = idx;
            }
        }
        NodeId(best as u32 + 1)
    }

    /// Compensated initial counter value for this model.
    pub fn c_initial(&self, clock: &ClockConfig) -> CInitial {
        compute_c_initial(self.t_trans_s, &self.t_pro_s[0], self.t_ps_tilde_s, clock.tick_seconds())
    }
}

/// Beacon transmission delay: the full sequence must arrive before the
/// correlation peak can exist.
pub fn compute_t_trans(beacon_bits: u64, symbol_s: f64) -> f64 {
    debug_assert!(beacon_bits >= 1 && symbol_s > 0.0);
    beacon_bits as f64 * symbol_s
}

/// Free-space propagation delay `distance / c`.
pub fn compute_t_pro(distance_m: f64) -> Result<f64, TimingError> {
    if !distance_m.is_finite() || distance_m <= 0.0 {
        return Err(TimingError::InvalidDistance(distance_m));
    }
    Ok(distance_m / SPEED_OF_LIGHT_M_PER_S)
}

/// Result of the compensation-constant computation: the tick value loaded
/// by slaves, plus the sub-tick rounding residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CInitial {
    pub ticks: u64,
    /// `(t_trans + max t_pro + t̃_ps) − ticks × t_clock`, in seconds.
    /// Always within half a tick of zero.
    pub residual_s: f64,
}

/// `c_initial = (t_trans + max_j t_pro(1,j) + t̃_ps) / t_clock`, rounded to
/// the nearest tick.
pub fn compute_c_initial(
    t_trans_s: f64,
    t_pro_row_s: &[f64],
    t_ps_tilde_s: f64,
    t_clock_s: f64,
) -> CInitial {
    debug_assert!(t_clock_s > 0.0);
    let max_pro = t_pro_row_s.iter().copied().fold(0.0, f64::max);
    let exact_s = t_trans_s + max_pro + t_ps_tilde_s;
    let ticks = math::round(exact_s / t_clock_s);
    debug_assert!(ticks >= 0.0);
    CInitial {
        ticks: ticks as u64,
        residual_s: exact_s - ticks * t_clock_s,
    }
}

/// Residual synchronization error of `node` for one beacon round with the
/// given processing-delay sample. Zero for the master by definition.
pub fn sync_error(node: NodeId, t_ps_sample_s: f64, delays: &DelayModel) -> f64 {
    if node.is_master() {
        return 0.0;
    }
    (delays.t_ps_tilde_s - t_ps_sample_s)
        + (delays.max_t_pro_from_master() - delays.t_pro_from_master(node))
}

/// One i.i.d. processing-delay sample.
pub fn sample_processing_delay(dist: &DelayDistribution, rng: &mut SimRng) -> f64 {
    dist.sample(rng)
}

/// Sync-error budget implied by the beacon interval: every admissible
/// `t_d` must satisfy `t_d <= |t_bi − (max t_pro + t̃_ps)|`.
pub fn sync_error_budget_s(t_bi_s: f64, delays: &DelayModel) -> f64 {
    math::abs(t_bi_s - (delays.max_t_pro_from_master() + delays.t_ps_tilde_s))
}

/// Free-running slot counter in `[0, C_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeCounter {
    value: u64,
    role: Role,
}

impl TimeCounter {
    pub fn new(role: Role, start: u64) -> Self {
        Self { value: start, role }
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn role(&self) -> Role {
        self.role
    }

    /// Advance one tick; returns true when the counter wrapped to zero.
    /// For a master the wrap is the normal period boundary; for a slave it
    /// means a whole period elapsed without a beacon reload.
    pub fn step(&mut self, c_max: u64) -> bool {
        debug_assert!(self.value < c_max);
        self.value += 1;
        if self.value == c_max {
            self.value = 0;
            true
        } else {
            false
        }
    }

    /// Beacon-decode reload (slaves only).
    pub fn reload(&mut self, value: u64) {
        debug_assert!(self.role == Role::Slave);
        self.value = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, StreamPurpose};

    #[test]
    fn transmission_delay_examples() {
        assert_eq!(compute_t_trans(1, 1.0), 1.0);
        // 256 bits at 2 Msym/s -> 128 us.
        assert!((compute_t_trans(256, 0.5e-6) - 128e-6).abs() < 1e-18);
        assert!((compute_t_trans(256, 1e-6) - 256e-6).abs() < 1e-18);
    }

    #[test]
    fn propagation_delay_examples() {
        assert!((compute_t_pro(299_792_458.0).unwrap() - 1.0).abs() < 1e-15);
        // Diagonal of a 110 m x 90 m rectangle.
        assert!((compute_t_pro(142.13).unwrap() - 474.09e-9).abs() < 0.05e-9);
        assert!((compute_t_pro(90.0).unwrap() - 300.21e-9).abs() < 0.05e-9);
        assert!(compute_t_pro(0.0).is_err());
        assert!(compute_t_pro(-5.0).is_err());
    }

    #[test]
    fn c_initial_zero_case() {
        let c = compute_c_initial(0.0, &[0.0], 0.0, 10e-9);
        assert_eq!(c.ticks, 0);
        assert_eq!(c.residual_s, 0.0);
    }

    #[test]
    fn c_initial_rounding_to_nearest_tick() {
        // (128 us + 474.1 ns + 4.43 us) / 10 ns = 13290.41 -> 13290.
        let c = compute_c_initial(128e-6, &[474.1e-9], 4.43e-6, 10e-9);
        assert_eq!(c.ticks, 13290);
        assert!((c.residual_s - 4.1e-9).abs() < 1e-12);
        assert!(c.residual_s.abs() < 0.5 * 10e-9);
    }

    #[test]
    fn sync_error_is_zero_for_master() {
        let model = DelayModel::from_positions(
            128e-6,
            &[(0.0, 0.0), (110.0, 0.0), (110.0, 90.0)],
            DelayDistribution::Constant { value_s: 4.43e-6 },
            4.43e-6,
        )
        .unwrap();
        assert_eq!(sync_error(NodeId::MASTER, 5e-6, &model), 0.0);
    }

    #[test]
    fn sync_error_vanishes_for_matched_farthest_slave() {
        let model = DelayModel::from_positions(
            128e-6,
            &[(0.0, 0.0), (110.0, 0.0), (110.0, 90.0)],
            DelayDistribution::Constant { value_s: 4.43e-6 },
            4.43e-6,
        )
        .unwrap();
        let farthest = model.farthest_slave();
        assert_eq!(farthest, NodeId(3));
        assert!(sync_error(farthest, 4.43e-6, &model).abs() < 1e-18);
    }

    #[test]
    fn sync_error_direct_substitution() {
        // (4.43 - 4.38) us + (474.1 - 300.2) ns = 223.9 ns.
        let model = DelayModel {
            t_trans_s: 128e-6,
            t_pro_s: alloc::vec![
                alloc::vec![0.0, 474.1e-9, 300.2e-9],
                alloc::vec![474.1e-9, 0.0, 1e-9],
                alloc::vec![300.2e-9, 1e-9, 0.0],
            ],
            t_ps: DelayDistribution::Constant { value_s: 4.43e-6 },
            t_ps_tilde_s: 4.43e-6,
        };
        let td = sync_error(NodeId(3), 4.38e-6, &model);
        assert!((td - 223.9e-9).abs() < 1e-13);
    }

    #[test]
    fn constant_distribution_always_returns_mean() {
        let d = DelayDistribution::Constant { value_s: 3.5e-6 };
        let mut rng = substream(9, NodeId(2), StreamPurpose::ProcessingDelay);
        for _ in 0..16 {
            assert_eq!(d.sample(&mut rng), 3.5e-6);
        }
        assert_eq!(d.mean(), 3.5e-6);
        assert_eq!(d.sd(), 0.0);
    }

    #[test]
    fn distribution_validation() {
        assert!(DelayDistribution::Uniform { lo_s: 2.0, hi_s: 1.0 }.validate().is_err());
        assert!(DelayDistribution::TruncatedNormal {
            mean_s: 1.0,
            sd_s: 0.0,
            lo_s: 0.0,
            hi_s: 2.0
        }
        .validate()
        .is_err());
        // Window 20 sigma away from the location: effectively zero mass.
        assert!(DelayDistribution::TruncatedNormal {
            mean_s: 0.0,
            sd_s: 1e-9,
            lo_s: 1.0,
            hi_s: 2.0
        }
        .validate()
        .is_err());
        assert!(DelayDistribution::TruncatedNormal {
            mean_s: 4.43e-6,
            sd_s: 122e-9,
            lo_s: 4.372e-6,
            hi_s: 4.488e-6
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn symmetric_truncation_keeps_the_mean() {
        let d = DelayDistribution::TruncatedNormal {
            mean_s: 4.467e-6,
            sd_s: 122e-9,
            lo_s: 4.409e-6,
            hi_s: 4.525e-6,
        };
        assert!((d.mean() - 4.467e-6).abs() < 1e-12);
        // Realized sd of the +-58 ns window with a 122 ns scale, computed
        // with 50-digit arithmetic: 32.98 ns.
        assert!((d.sd() - 32.98e-9).abs() < 0.05e-9);
    }

    #[test]
    fn counter_wraps_after_cmax_steps() {
        let c_max = 1000u64;
        let mut counter = TimeCounter::new(Role::Master, 0);
        let mut seen = alloc::vec![false; c_max as usize];
        for step in 0..c_max {
            seen[counter.value() as usize] = true;
            let wrapped = counter.step(c_max);
            assert_eq!(wrapped, step == c_max - 1);
        }
        assert_eq!(counter.value(), 0);
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn clock_requires_exact_division() {
        assert!(ClockConfig::new(10, 1_000_000_000).is_ok());
        assert!(ClockConfig::new(3, 1_000_000_000).is_err());
        assert!(ClockConfig::new(0, 100).is_err());
        let clock = ClockConfig::new(10, 1_000_000_000).unwrap();
        assert_eq!(clock.c_max(), 100_000_000);
    }
}
