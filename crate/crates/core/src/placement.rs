//! Random replica placement for one frame.
//!
//! Unslotted protocols draw integer symbol offsets on `[0, F - t_s]` and
//! reject draws where a user's own replicas overlap; the slotted protocol
//! draws distinct slot indices. Every frame owns its random stream, seeded
//! from a single `u64`, so placement is reproducible and frames can be
//! generated concurrently without coordination.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::params::{
    derive_geometry, FrameGeometry, ParamError, Protocol, SystemParams,
};

/// Redraw budget per user before unslotted placement gives up. At the
/// reference geometry the per-draw rejection probability is about 1%, so
/// this cap is unreachable in practice; it exists to bound runtime on
/// near-infeasible geometries.
pub const PLACEMENT_RETRY_CAP: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum PlacementError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("user {user}: no non-overlapping placement found in {attempts} draws")]
    RetryCapExceeded { user: usize, attempts: usize },
    #[error("placement for user {user} violates frame invariants: {reason}")]
    InvalidPlacement { user: usize, reason: String },
}

/// Where one user's replicas sit: symbol offsets for unslotted protocols,
/// slot indices for the slotted one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicaPlacement {
    pub user_id: usize,
    pub starts: Vec<usize>,
}

/// One generated frame: parameters, geometry, all placements and the
/// per-user decode-luck draw consumed by the stochastic decode model.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameInstance {
    pub params: SystemParams,
    pub geometry: FrameGeometry,
    pub placements: Vec<ReplicaPlacement>,
    pub decode_draws: Vec<f64>,
    pub rng_seed: u64,
}

impl FrameInstance {
    pub fn n_users(&self) -> usize {
        self.placements.len()
    }

    /// Start of a replica in frame symbols, independent of protocol.
    pub fn replica_symbol_start(&self, user: usize, replica: usize) -> usize {
        let start = self.placements[user].starts[replica];
        match self.params.protocol {
            Protocol::Crdsa => start * self.geometry.packet_symbols,
            _ => start,
        }
    }

    /// Builds a frame from explicit placements, checking the placement
    /// invariants. Used for constructed scenarios and tests.
    pub fn from_placements(
        params: SystemParams,
        placements: Vec<ReplicaPlacement>,
        decode_draws: Vec<f64>,
        rng_seed: u64,
    ) -> Result<Self, PlacementError> {
        let geometry = derive_geometry(&params)?;
        assert_eq!(placements.len(), decode_draws.len());
        for p in &placements {
            validate_placement(&params, &geometry, p)?;
        }
        Ok(FrameInstance {
            params,
            geometry,
            placements,
            decode_draws,
            rng_seed,
        })
    }

    /// One line per replica: `user <id> replica <r> start <offset>`.
    pub fn dump_placements(&self) -> String {
        let mut out = String::new();
        for p in &self.placements {
            for (r, &s) in p.starts.iter().enumerate() {
                out.push_str(&format!("user {} replica {} start {}\n", p.user_id, r, s));
            }
        }
        out
    }
}

fn validate_placement(
    params: &SystemParams,
    geometry: &FrameGeometry,
    placement: &ReplicaPlacement,
) -> Result<(), PlacementError> {
    let err = |reason: String| PlacementError::InvalidPlacement {
        user: placement.user_id,
        reason,
    };
    if placement.starts.len() != params.degree {
        return Err(err(format!(
            "expected {} replicas, got {}",
            params.degree,
            placement.starts.len()
        )));
    }
    match params.protocol {
        Protocol::Crdsa => {
            for (i, &a) in placement.starts.iter().enumerate() {
                if a >= geometry.n_slots {
                    return Err(err(format!("slot {a} out of range")));
                }
                if placement.starts[..i].contains(&a) {
                    return Err(err(format!("slot {a} used twice")));
                }
            }
        }
        _ => {
            let max_start = geometry.frame_symbols - geometry.packet_symbols;
            for (i, &a) in placement.starts.iter().enumerate() {
                if a > max_start {
                    return Err(err(format!("start {a} beyond frame edge")));
                }
                for &b in &placement.starts[..i] {
                    if a.abs_diff(b) < geometry.packet_symbols {
                        return Err(err(format!("replicas at {a} and {b} overlap")));
                    }
                }
            }
        }
    }
    Ok(())
}

fn non_overlapping(starts: &[usize], packet_symbols: usize) -> bool {
    for (i, &a) in starts.iter().enumerate() {
        for &b in &starts[..i] {
            if a.abs_diff(b) < packet_symbols {
                return false;
            }
        }
    }
    true
}

/// Unslotted placement: each user draws `degree` uniform starts on
/// `[0, F - t_s]`, redrawing the whole tuple until no two of its own
/// replicas overlap. Used by both CRA and ECRA, so one seed yields the
/// identical frame for the paired comparison.
pub fn place_cra(
    params: &SystemParams,
    n_users: usize,
    seed: u64,
) -> Result<FrameInstance, PlacementError> {
    let geometry = derive_geometry(params)?;
    let max_start = geometry.frame_symbols - geometry.packet_symbols;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut placements = Vec::with_capacity(n_users);
    for user_id in 0..n_users {
        let mut starts = vec![0usize; params.degree];
        let mut attempts = 0;
        loop {
            attempts += 1;
            if attempts > PLACEMENT_RETRY_CAP {
                return Err(PlacementError::RetryCapExceeded {
                    user: user_id,
                    attempts: PLACEMENT_RETRY_CAP,
                });
            }
            for s in starts.iter_mut() {
                *s = rng.random_range(0..=max_start);
            }
            if non_overlapping(&starts, geometry.packet_symbols) {
                break;
            }
        }
        placements.push(ReplicaPlacement { user_id, starts });
    }
    let decode_draws = (0..n_users).map(|_| rng.random::<f64>()).collect();

    Ok(FrameInstance {
        params: params.clone(),
        geometry,
        placements,
        decode_draws,
        rng_seed: seed,
    })
}

/// Slotted placement: each user draws `degree` distinct slots uniformly
/// without replacement from `[0, n_slots)`.
pub fn place_crdsa(
    params: &SystemParams,
    n_users: usize,
    seed: u64,
) -> Result<FrameInstance, PlacementError> {
    let geometry = derive_geometry(params)?;
    if geometry.n_slots < params.degree {
        return Err(PlacementError::Param(ParamError::TooFewSlots {
            n_slots: geometry.n_slots,
            degree: params.degree,
        }));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut placements = Vec::with_capacity(n_users);
    for user_id in 0..n_users {
        let starts = rand::seq::index::sample(&mut rng, geometry.n_slots, params.degree).into_vec();
        placements.push(ReplicaPlacement { user_id, starts });
    }
    let decode_draws = (0..n_users).map(|_| rng.random::<f64>()).collect();

    Ok(FrameInstance {
        params: params.clone(),
        geometry,
        placements,
        decode_draws,
        rng_seed: seed,
    })
}

/// Places a frame according to the configured protocol.
pub fn place_frame(
    params: &SystemParams,
    n_users: usize,
    seed: u64,
) -> Result<FrameInstance, PlacementError> {
    match params.protocol {
        Protocol::Crdsa => place_crdsa(params, n_users, seed),
        _ => place_cra(params, n_users, seed),
    }
}

/// Splittable counter-based seed for frame `frame_index` of load point
/// `g_index` under `master_seed`. Parallel workers derive their streams
/// from indices alone, so results do not depend on execution order.
pub fn frame_seed(master_seed: u64, g_index: u64, frame_index: u64) -> u64 {
    let mut z = splitmix64(master_seed);
    z = splitmix64(z ^ g_index);
    splitmix64(z ^ frame_index)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
