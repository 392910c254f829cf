//! Frame-level Monte-Carlo simulator for successive-interference-
//! cancellation random access protocols: unslotted CRA and ECRA, and
//! slotted CRDSA.
//!
//! Users transmit `d` replicas of their packet per frame. The receiver
//! repeatedly scans the frame, decides each replica from its live SNIR and
//! cancels every replica of each decoded user. ECRA adds a second stage
//! that stitches together each remaining user's least-interfered symbols
//! across its replicas and attempts decoding on the combined packet.
//! Decode decisions come from either a Shannon capacity threshold or the
//! random coding bound on block error probability.
//!
//! Module map:
//! - [`params`]: experiment parameters, channel model, frame geometry.
//! - [`placement`]: seeded random replica placement per frame.
//! - [`interference`]: occupancy counts, interference ratios, SNIR,
//!   replica combining.
//! - [`decoder`]: Shannon-bound and random-coding-bound decisions.
//! - [`sic`]: the per-frame cancellation engine.
//! - [`sweep`]: Monte-Carlo load sweeps and SNIR histograms (parallel
//!   across frames with the `parallel` feature, on by default).
//! - [`scenarios`]: tiny constructed collision fixtures.
//! - [`config`]: experiment configuration for the command-line front end.

pub mod config;
pub mod decoder;
pub mod interference;
pub mod params;
pub mod placement;
pub mod scenarios;
pub mod sic;
pub mod sweep;

pub use config::{ExperimentConfig, Mode};
pub use decoder::{decide, rcb_per, shannon_threshold, DecodeModel};
pub use interference::{InterferenceProfile, SnirReport};
pub use params::{
    derive_geometry, users_for_load, ChannelModel, DecodeModelKind, FrameGeometry, Protocol,
    SystemParams,
};
pub use placement::{place_cra, place_crdsa, place_frame, FrameInstance, ReplicaPlacement};
pub use sic::{run_ecra, run_protocol, run_protocol_traced, run_sic, DecodingState};
pub use sweep::{simulate_frame, snir_histogram, sweep, sweep_sequential, SweepStats};
