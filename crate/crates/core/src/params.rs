//! Experiment parameter space: system configuration, channel model and the
//! frame geometry derived from them.
//!
//! All downstream modules work in units of symbols. The conversion happens
//! exactly once, in [`derive_geometry`]: a frame of `F = round(Tf/Ts)`
//! symbols holds packets of `t_s = Lp/R` symbols each, and the slotted
//! variant divides the frame into `floor(F/t_s)` slots.

use thiserror::Error;

/// Random access protocol variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    /// Unslotted, SIC only.
    Cra,
    /// Unslotted, SIC plus replica combining.
    Ecra,
    /// Slotted, SIC only (degree-d diversity).
    Crdsa,
}

impl Protocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Cra => "cra",
            Protocol::Ecra => "ecra",
            Protocol::Crdsa => "crdsa",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cra" => Ok(Protocol::Cra),
            "ecra" => Ok(Protocol::Ecra),
            "crdsa" => Ok(Protocol::Crdsa),
            other => Err(format!("unknown protocol '{other}' (expected cra, ecra or crdsa)")),
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which decode decision model maps SNIR to success/failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecodeModelKind {
    /// Deterministic capacity threshold: success iff SNIR >= 2^R - 1.
    ShannonBound,
    /// Stochastic threshold from the random coding error exponent.
    RandomCodingBound,
}

impl DecodeModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DecodeModelKind::ShannonBound => "sb",
            DecodeModelKind::RandomCodingBound => "rcb",
        }
    }
}

impl std::str::FromStr for DecodeModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sb" | "shannon" => Ok(DecodeModelKind::ShannonBound),
            "rcb" | "random-coding" => Ok(DecodeModelKind::RandomCodingBound),
            other => Err(format!("unknown decode model '{other}' (expected sb or rcb)")),
        }
    }
}

impl std::fmt::Display for DecodeModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Full experiment configuration for one protocol/model combination.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Rate in bits per symbol (code rate times log2 of the modulation order).
    pub rate: f64,
    /// Nominal per-user SNR in dB.
    pub snr_db: f64,
    /// Frame duration in seconds.
    pub frame_duration: f64,
    /// Symbol duration in seconds.
    pub symbol_duration: f64,
    /// Packet payload in bits.
    pub packet_bits: u64,
    /// Replicas per user per frame.
    pub degree: usize,
    /// Cap on SIC passes (combining sweeps count against the same budget).
    pub max_sic_iterations: usize,
    pub protocol: Protocol,
    pub decode_model: DecodeModelKind,
}

impl Default for SystemParams {
    /// Reference campaign: R=2 bit/sym at 10 dB, 100 ms frames of 1 us
    /// symbols, 1000-bit packets, two replicas, ten SIC rounds.
    fn default() -> Self {
        SystemParams {
            rate: 2.0,
            snr_db: 10.0,
            frame_duration: 100e-3,
            symbol_duration: 1e-6,
            packet_bits: 1000,
            degree: 2,
            max_sic_iterations: 10,
            protocol: Protocol::Ecra,
            decode_model: DecodeModelKind::ShannonBound,
        }
    }
}

/// Frame layout in symbols, derived from [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameGeometry {
    /// Symbols per frame.
    pub frame_symbols: usize,
    /// Symbols per packet.
    pub packet_symbols: usize,
    /// Slots per frame (meaningful for the slotted protocol only).
    pub n_slots: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("rate must be > 0, got {0}")]
    NonPositiveRate(f64),
    #[error("degree must be >= 2, got {0}")]
    DegreeTooSmall(usize),
    #[error("max_sic_iterations must be >= 1")]
    NoIterations,
    #[error("frame and symbol durations must be > 0")]
    NonPositiveDuration,
    #[error("packet_bits / rate = {0} is not a positive integer number of symbols")]
    NonIntegerPacketSymbols(f64),
    #[error("frame of {frame_symbols} symbols cannot hold {degree} non-overlapping replicas of {packet_symbols} symbols")]
    FrameTooShort {
        frame_symbols: usize,
        packet_symbols: usize,
        degree: usize,
    },
    #[error("{n_slots} slots cannot hold {degree} distinct replicas per user")]
    TooFewSlots { n_slots: usize, degree: usize },
}

/// Derives the frame geometry and checks the parameter invariants.
///
/// Fails when the packet length is not an integer number of symbols, when
/// the frame cannot hold one user's replicas without self-overlap, or (for
/// the slotted protocol) when there are fewer slots than replicas.
pub fn derive_geometry(params: &SystemParams) -> Result<FrameGeometry, ParamError> {
    if params.rate <= 0.0 {
        return Err(ParamError::NonPositiveRate(params.rate));
    }
    if params.degree < 2 {
        return Err(ParamError::DegreeTooSmall(params.degree));
    }
    if params.max_sic_iterations < 1 {
        return Err(ParamError::NoIterations);
    }
    if params.frame_duration <= 0.0 || params.symbol_duration <= 0.0 {
        return Err(ParamError::NonPositiveDuration);
    }

    let packet_symbols_f = params.packet_bits as f64 / params.rate;
    let rounded = packet_symbols_f.round();
    if rounded < 1.0 || (packet_symbols_f - rounded).abs() > 1e-9 {
        return Err(ParamError::NonIntegerPacketSymbols(packet_symbols_f));
    }
    let packet_symbols = rounded as usize;

    let frame_symbols = (params.frame_duration / params.symbol_duration).round() as usize;
    if frame_symbols < params.degree * packet_symbols {
        return Err(ParamError::FrameTooShort {
            frame_symbols,
            packet_symbols,
            degree: params.degree,
        });
    }

    let n_slots = frame_symbols / packet_symbols;
    if params.protocol == Protocol::Crdsa && n_slots < params.degree {
        return Err(ParamError::TooFewSlots {
            n_slots,
            degree: params.degree,
        });
    }

    Ok(FrameGeometry {
        frame_symbols,
        packet_symbols,
        n_slots,
    })
}

/// Number of users that realizes a normalized load of `g` Erlang,
/// together with the load actually realized after rounding.
///
/// Inverts `G = N_u * Lp * Ts / (Tf * R)` and rounds to the nearest user
/// count; the effective load is recomputed from the rounded count so
/// reports always reflect the simulated traffic.
pub fn users_for_load(params: &SystemParams, g: f64) -> (usize, f64) {
    assert!(g >= 0.0, "load must be non-negative");
    let packets_per_erlang =
        params.frame_duration * params.rate / (params.packet_bits as f64 * params.symbol_duration);
    let n_users = (g * packets_per_erlang).round() as usize;
    (n_users, n_users as f64 / packets_per_erlang)
}

/// Equal-power channel: unit signal power, noise fixed by the nominal SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub signal_power: f64,
    pub noise_power: f64,
}

impl ChannelModel {
    pub fn from_snr_db(snr_db: f64) -> Self {
        ChannelModel {
            signal_power: 1.0,
            noise_power: 10f64.powf(-snr_db / 10.0),
        }
    }

    pub fn snr_linear(&self) -> f64 {
        self.signal_power / self.noise_power
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(rate: f64) -> SystemParams {
        SystemParams {
            rate,
            ..SystemParams::default()
        }
    }

    #[test]
    fn reference_geometry_rate2() {
        let geom = derive_geometry(&params(2.0)).unwrap();
        assert_eq!(geom.frame_symbols, 100_000);
        assert_eq!(geom.packet_symbols, 500);
        assert_eq!(geom.n_slots, 200);
    }

    #[test]
    fn reference_geometry_rate1() {
        let geom = derive_geometry(&params(1.0)).unwrap();
        assert_eq!(geom.frame_symbols, 100_000);
        assert_eq!(geom.packet_symbols, 1000);
        assert_eq!(geom.n_slots, 100);
    }

    #[test]
    fn frame_too_short_for_replicas() {
        let p = SystemParams {
            rate: 1.0,
            frame_duration: 1e-3,
            ..SystemParams::default()
        };
        assert_eq!(
            derive_geometry(&p),
            Err(ParamError::FrameTooShort {
                frame_symbols: 1000,
                packet_symbols: 1000,
                degree: 2,
            })
        );
    }

    #[test]
    fn non_integer_packet_symbols_rejected() {
        assert!(matches!(
            derive_geometry(&params(3.0)),
            Err(ParamError::NonIntegerPacketSymbols(_))
        ));
    }

    #[test]
    fn degree_below_two_rejected() {
        let p = SystemParams {
            degree: 1,
            ..SystemParams::default()
        };
        assert_eq!(derive_geometry(&p), Err(ParamError::DegreeTooSmall(1)));
    }

    #[test]
    fn crdsa_slot_count_at_boundary() {
        // floor(F/t_s) >= d holds exactly when F >= d*t_s, so a slotted
        // config that passes the frame-length check always has enough slots.
        let p = SystemParams {
            rate: 1.0,
            frame_duration: 2e-3,
            protocol: Protocol::Crdsa,
            ..SystemParams::default()
        };
        let geom = derive_geometry(&p).unwrap();
        assert_eq!(geom.n_slots, 2);
        assert_eq!(geom.frame_symbols, 2000);
    }

    #[test]
    fn users_for_reference_loads() {
        let (n, g_eff) = users_for_load(&params(2.0), 0.5);
        assert_eq!(n, 100);
        assert!((g_eff - 0.5).abs() < 1e-12);

        let (n, g_eff) = users_for_load(&params(1.0), 1.0);
        assert_eq!(n, 100);
        assert!((g_eff - 1.0).abs() < 1e-12);

        let (n, g_eff) = users_for_load(&params(2.0), 0.0);
        assert_eq!(n, 0);
        assert_eq!(g_eff, 0.0);
    }

    #[test]
    fn geometry_is_pure() {
        let p = params(2.0);
        assert_eq!(derive_geometry(&p), derive_geometry(&p));
    }

    #[test]
    fn channel_noise_from_snr() {
        let ch = ChannelModel::from_snr_db(10.0);
        assert!((ch.snr_linear() - 10.0).abs() < 1e-12);
        assert!((ch.noise_power - 0.1).abs() < 1e-12);
        assert_eq!(ch.signal_power, 1.0);
    }

    proptest! {
        // Converting a user count to a load and back is lossless.
        #[test]
        fn load_round_trips_through_users(n_users in 0usize..100_000, rate in prop::sample::select(vec![1.0, 2.0, 4.0])) {
            let p = params(rate);
            let per_erlang = p.frame_duration * p.rate / (p.packet_bits as f64 * p.symbol_duration);
            let g = n_users as f64 / per_erlang;
            let (n, g_eff) = users_for_load(&p, g);
            prop_assert_eq!(n, n_users);
            prop_assert!((g_eff - g).abs() < 1e-9);
        }
    }
}
