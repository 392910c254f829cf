//! Decode decision models.
//!
//! The Shannon bound decodes any packet whose SNIR reaches the capacity
//! threshold `2^R - 1`. The random coding bound turns the Gaussian-input
//! error exponent into a block error probability for `n`-symbol packets
//! and compares it against the user's decode-luck draw. The draw is fixed
//! per user for the whole frame, so a packet's decision can only flip from
//! failure to success when its SNIR actually improves.

use crate::params::{DecodeModelKind, FrameGeometry, SystemParams};

/// SNIR-to-decision mapping for one experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeModel {
    pub kind: DecodeModelKind,
    /// Rate in bits per symbol.
    pub rate: f64,
    /// Block length in symbols (used by the random coding bound).
    pub block_symbols: usize,
}

impl DecodeModel {
    pub fn from_params(params: &SystemParams, geometry: &FrameGeometry) -> Self {
        DecodeModel {
            kind: params.decode_model,
            rate: params.rate,
            block_symbols: geometry.packet_symbols,
        }
    }
}

/// Capacity threshold: the lowest SNIR at which rate `R` is achievable,
/// from inverting `R = log2(1 + SNIR)`.
pub fn shannon_threshold(rate: f64) -> f64 {
    rate.exp2() - 1.0
}

/// Gaussian-input exponent `E_0(rho, S) = rho * log2(1 + S / (1 + rho))`
/// in bits per symbol.
fn gallager_e0(rho: f64, snir_linear: f64) -> f64 {
    rho * (1.0 + snir_linear / (1.0 + rho)).log2()
}

/// Random coding error exponent `E_r(R) = max_{rho in [0,1]} E_0(rho) - rho R`,
/// maximized by golden-section search (the objective is concave in rho).
pub fn rcb_error_exponent(snir_linear: f64, rate: f64) -> f64 {
    if snir_linear <= 0.0 {
        return 0.0;
    }
    let f = |rho: f64| gallager_e0(rho, snir_linear) - rho * rate;

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-10 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    // rho = 0 yields 0, so the exponent is never negative; check the upper
    // boundary in case the maximum sits at rho = 1.
    f(0.5 * (a + b)).max(f(1.0)).max(0.0)
}

/// Random-coding-bound block error probability for an `n`-symbol packet:
/// `min(1, 2^(-n * E_r(R)))`.
pub fn rcb_per(snir_linear: f64, rate: f64, block_symbols: usize) -> f64 {
    let exponent = rcb_error_exponent(snir_linear, rate);
    (-(block_symbols as f64) * exponent).exp2().min(1.0)
}

/// PER-vs-SNR curve of the random coding bound over a dB grid, for
/// validation plots.
pub fn rcb_per_curve(snr_db_grid: &[f64], rate: f64, block_symbols: usize) -> Vec<(f64, f64)> {
    snr_db_grid
        .iter()
        .map(|&db| (db, rcb_per(10f64.powf(db / 10.0), rate, block_symbols)))
        .collect()
}

/// Decode decision for one packet. `user_draw` is the uniform [0,1) value
/// fixed at frame creation; the Shannon bound ignores it.
pub fn decide(model: &DecodeModel, snir_linear: f64, user_draw: f64) -> bool {
    match model.kind {
        DecodeModelKind::ShannonBound => snir_linear >= shannon_threshold(model.rate),
        DecodeModelKind::RandomCodingBound => {
            user_draw >= rcb_per(snir_linear, model.rate, model.block_symbols)
        }
    }
}
