//! Per-symbol interference accounting.
//!
//! The frame-wide occupancy vector counts how many live replica symbols
//! cover each frame symbol. A replica's interference profile is the
//! occupancy over its own span minus its own contribution, the interference
//! ratio is the mean of that profile, and the equal-power SNIR follows as
//! `P / (x*P + N)`. Combining takes the elementwise minimum across one
//! user's replica profiles.

use crate::params::ChannelModel;
use crate::placement::FrameInstance;

/// Interference counts over one packet span: `counts[s]` foreign replica
/// symbols overlap symbol `s` of this replica.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterferenceProfile {
    pub counts: Vec<u32>,
}

impl InterferenceProfile {
    /// Sum of the per-symbol counts. Exact, so orderings derived from it
    /// are free of float rounding.
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Interference ratio: mean count over the packet.
    pub fn ratio(&self) -> f64 {
        if self.counts.is_empty() {
            return 0.0;
        }
        self.total() as f64 / self.counts.len() as f64
    }
}

/// Interference ratio and the SNIR it induces for one packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnirReport {
    pub ratio: f64,
    pub snir_linear: f64,
    pub snir_db: f64,
}

/// Occupancy over the whole frame for the given set of live users, via
/// start/end difference marks and a prefix sum.
pub fn build_occupancy(
    frame: &FrameInstance,
    active_users: impl IntoIterator<Item = usize>,
) -> Vec<u32> {
    let f = frame.geometry.frame_symbols;
    let t_s = frame.geometry.packet_symbols;
    let mut marks = vec![0i32; f + 1];
    for user in active_users {
        for replica in 0..frame.placements[user].starts.len() {
            let start = frame.replica_symbol_start(user, replica);
            marks[start] += 1;
            marks[start + t_s] -= 1;
        }
    }
    let mut occupancy = Vec::with_capacity(f);
    let mut level = 0i32;
    for &m in &marks[..f] {
        level += m;
        occupancy.push(level as u32);
    }
    occupancy
}

/// Foreign-interference profile of one replica against the current
/// occupancy. The replica's own symbol is subtracted, so the user must be
/// live in `occupancy`.
pub fn replica_profile(
    frame: &FrameInstance,
    occupancy: &[u32],
    user: usize,
    replica: usize,
) -> InterferenceProfile {
    let start = frame.replica_symbol_start(user, replica);
    let t_s = frame.geometry.packet_symbols;
    let counts = occupancy[start..start + t_s].iter().map(|&c| c - 1).collect();
    InterferenceProfile { counts }
}

/// Equal-power SNIR of a packet with the given interference profile.
pub fn snir_of(profile: &InterferenceProfile, channel: &ChannelModel) -> SnirReport {
    snir_of_ratio(profile.ratio(), channel)
}

/// SNIR for a known interference ratio: `P / (x*P + N)`.
pub fn snir_of_ratio(ratio: f64, channel: &ChannelModel) -> SnirReport {
    let p = channel.signal_power;
    let snir_linear = p / (ratio * p + channel.noise_power);
    SnirReport {
        ratio,
        snir_linear,
        snir_db: 10.0 * snir_linear.log10(),
    }
}

/// Combined profile over one user's replicas: the elementwise minimum
/// count at each packet-symbol index. Ties are value-identical, so any
/// replica attaining the minimum may supply the symbol; traces report the
/// lowest replica index.
pub fn combined_profile(profiles: &[InterferenceProfile]) -> InterferenceProfile {
    assert!(!profiles.is_empty());
    let t_s = profiles[0].counts.len();
    debug_assert!(profiles.iter().all(|p| p.counts.len() == t_s));
    let mut counts = profiles[0].counts.clone();
    for p in &profiles[1..] {
        for (c, &v) in counts.iter_mut().zip(&p.counts) {
            *c = (*c).min(v);
        }
    }
    InterferenceProfile { counts }
}
