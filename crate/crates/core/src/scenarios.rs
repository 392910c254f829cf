//! Constructed two-user collision scenarios.
//!
//! These are the smallest frames on which SIC alone stalls: every replica
//! of every user is interfered too heavily to decode, so nothing can be
//! cancelled. The unslotted variant interferes complementary halves, which
//! combining resolves completely; the slotted variant collides whole slots,
//! which nothing resolves.

use crate::params::{Protocol, SystemParams};
use crate::placement::{FrameInstance, PlacementError, ReplicaPlacement};

fn two_user_frame(
    params: SystemParams,
    starts: [[usize; 2]; 2],
) -> Result<FrameInstance, PlacementError> {
    let placements = starts
        .iter()
        .enumerate()
        .map(|(user_id, s)| ReplicaPlacement {
            user_id,
            starts: s.to_vec(),
        })
        .collect();
    FrameInstance::from_placements(params, placements, vec![0.0, 0.0], 0)
}

/// Unslotted loop: each user's first replicas overlap on one half, the
/// second replicas on the other half, so every replica carries 50%
/// interference but each user has every symbol clean in some replica.
pub fn unslotted_loop(params: &SystemParams) -> Result<FrameInstance, PlacementError> {
    assert_ne!(
        params.protocol,
        Protocol::Crdsa,
        "unslotted loop needs an unslotted protocol"
    );
    let mut params = params.clone();
    params.degree = 2;
    let t_s = crate::params::derive_geometry(&params)?.packet_symbols;
    let half = t_s / 2;
    two_user_frame(
        params,
        [[0, 2 * t_s], [half, t_s + half]],
    )
}

/// Slotted loop: both users occupy the same two slots, every collision is
/// total, and combining would gain nothing.
pub fn slotted_loop(params: &SystemParams) -> Result<FrameInstance, PlacementError> {
    let mut params = params.clone();
    params.protocol = Protocol::Crdsa;
    params.degree = 2;
    two_user_frame(params, [[0, 1], [0, 1]])
}
