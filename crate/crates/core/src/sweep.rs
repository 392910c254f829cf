//! Monte-Carlo harness: load sweeps and SNIR histograms.
//!
//! Frames are mutually independent: each one derives its seed from
//! (master seed, load index, frame index) and is simulated in isolation,
//! so load points and frames can run in any order or in parallel without
//! changing a single output bit. Aggregation sticks to integer counters
//! for the same reason.

use crate::decoder::DecodeModel;
use crate::interference::{
    build_occupancy, combined_profile, replica_profile, snir_of,
};
use crate::params::{users_for_load, ChannelModel, SystemParams};
use crate::placement::{frame_seed, place_cra, place_frame, PlacementError};
use crate::sic::run_protocol;

/// Decode outcome of one simulated frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameOutcome {
    pub n_users: usize,
    pub n_decoded: usize,
}

/// Aggregates for one load point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepStats {
    pub g_nominal: f64,
    /// Load realized after rounding the user count.
    pub g_effective: f64,
    pub n_users: usize,
    pub n_frames: usize,
    /// Total packets lost across all frames.
    pub packets_lost: u64,
    pub per: f64,
    /// Normal-approximation 95% confidence half-width on `per`.
    pub per_ci95: f64,
    pub throughput: f64,
    /// Smallest PER resolvable with this sample size, 1/(N_u * N_f).
    pub per_floor: f64,
}

impl SweepStats {
    fn from_losses(
        g_nominal: f64,
        g_effective: f64,
        n_users: usize,
        losses: &[u64],
    ) -> SweepStats {
        let n_frames = losses.len();
        let packets_lost: u64 = losses.iter().sum();
        let packets_total = (n_users * n_frames) as f64;
        let per = if packets_total > 0.0 {
            packets_lost as f64 / packets_total
        } else {
            0.0
        };
        let per_ci95 = if n_frames > 1 && n_users > 0 {
            let sum = packets_lost as f64;
            let sum_sq: f64 = losses.iter().map(|&l| (l * l) as f64).sum();
            let var_losses = (sum_sq - sum * sum / n_frames as f64) / (n_frames - 1) as f64;
            let var_per = var_losses.max(0.0) / (n_users as f64 * n_users as f64);
            1.96 * (var_per / n_frames as f64).sqrt()
        } else {
            0.0
        };
        SweepStats {
            g_nominal,
            g_effective,
            n_users,
            n_frames,
            packets_lost,
            per,
            per_ci95,
            throughput: (1.0 - per) * g_effective,
            per_floor: if packets_total > 0.0 {
                1.0 / packets_total
            } else {
                f64::INFINITY
            },
        }
    }
}

/// CSV header for sweep output.
pub const SWEEP_CSV_HEADER: &str =
    "protocol,model,R,snr_db,G_nominal,G_effective,N_u,N_f,P_err,per,per_ci95,throughput";

/// One CSV row for this load point under the given configuration.
pub fn sweep_csv_row(params: &SystemParams, stats: &SweepStats) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        params.protocol,
        params.decode_model,
        params.rate,
        params.snr_db,
        stats.g_nominal,
        stats.g_effective,
        stats.n_users,
        stats.n_frames,
        stats.packets_lost,
        stats.per,
        stats.per_ci95,
        stats.throughput
    )
}

/// Places and decodes one frame. Deterministic in (params, g, frame_seed).
pub fn simulate_frame(
    params: &SystemParams,
    g: f64,
    seed: u64,
) -> Result<FrameOutcome, PlacementError> {
    let (n_users, _) = users_for_load(params, g);
    let frame = place_frame(params, n_users, seed)?;
    let model = DecodeModel::from_params(params, &frame.geometry);
    let state = run_protocol(&frame, &model);
    Ok(FrameOutcome {
        n_users,
        n_decoded: state.n_decoded(),
    })
}

#[cfg(feature = "parallel")]
fn map_frames<T: Send>(
    n_frames: usize,
    f: impl Fn(usize) -> Result<T, PlacementError> + Sync + Send,
) -> Result<Vec<T>, PlacementError> {
    use rayon::prelude::*;
    (0..n_frames).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_frames<T>(
    n_frames: usize,
    f: impl Fn(usize) -> Result<T, PlacementError>,
) -> Result<Vec<T>, PlacementError> {
    (0..n_frames).map(f).collect()
}

fn sweep_point(
    params: &SystemParams,
    g: f64,
    g_index: usize,
    n_frames: usize,
    master_seed: u64,
    parallel: bool,
) -> Result<SweepStats, PlacementError> {
    let (n_users, g_effective) = users_for_load(params, g);
    let run = |frame_index: usize| -> Result<u64, PlacementError> {
        let seed = frame_seed(master_seed, g_index as u64, frame_index as u64);
        let outcome = simulate_frame(params, g, seed)?;
        Ok((outcome.n_users - outcome.n_decoded) as u64)
    };
    let losses = if parallel {
        map_frames(n_frames, run)?
    } else {
        (0..n_frames).map(run).collect::<Result<Vec<_>, _>>()?
    };
    Ok(SweepStats::from_losses(g, g_effective, n_users, &losses))
}

/// Monte-Carlo sweep over the load grid: `n_frames` independent frames per
/// load point. With the `parallel` feature enabled the frames run on the
/// rayon pool; results are identical either way.
pub fn sweep(
    params: &SystemParams,
    g_grid: &[f64],
    n_frames: usize,
    master_seed: u64,
) -> Result<Vec<SweepStats>, PlacementError> {
    g_grid
        .iter()
        .enumerate()
        .map(|(i, &g)| sweep_point(params, g, i, n_frames, master_seed, true))
        .collect()
}

/// Single-threaded sweep, always available for comparison runs and
/// benchmarks regardless of features.
pub fn sweep_sequential(
    params: &SystemParams,
    g_grid: &[f64],
    n_frames: usize,
    master_seed: u64,
) -> Result<Vec<SweepStats>, PlacementError> {
    g_grid
        .iter()
        .enumerate()
        .map(|(i, &g)| sweep_point(params, g, i, n_frames, master_seed, false))
        .collect()
}

/// Normalized SNIR density over fixed-width dB bins; bin `i` spans
/// `(edges_db[i], edges_db[i+1]]` and the top edge sits at the nominal SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct SnirHistogram {
    pub edges_db: Vec<f64>,
    pub density: Vec<f64>,
}

/// Bin width used for SNIR histograms, in dB.
pub const SNIR_BIN_DB: f64 = 0.25;

impl SnirHistogram {
    pub fn n_bins(&self) -> usize {
        self.density.len()
    }

    /// Empirical CDF evaluated at every bin edge.
    pub fn cdf_at_edges(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for &d in &self.density {
            acc += d * SNIR_BIN_DB;
            out.push(acc);
        }
        out
    }
}

fn bin_samples(samples: &[f64], snr_db: f64, n_bins: usize) -> SnirHistogram {
    let mut counts = vec![0u64; n_bins];
    for &x in samples {
        // Bins counted from the top edge, left-open right-closed.
        let j = ((snr_db - x) / SNIR_BIN_DB).floor() as usize;
        counts[n_bins - 1 - j.min(n_bins - 1)] += 1;
    }
    let total = samples.len() as f64;
    SnirHistogram {
        edges_db: (0..=n_bins)
            .map(|i| snr_db - (n_bins - i) as f64 * SNIR_BIN_DB)
            .collect(),
        density: counts
            .iter()
            .map(|&c| c as f64 / (total * SNIR_BIN_DB))
            .collect(),
    }
}

/// Pre-cancellation SNIR distributions at load `g` over `n_frames`
/// unslotted frames: per-replica SNIRs on one side, combined-packet SNIRs
/// on the other. Both histograms share the same binning.
pub fn snir_histogram(
    params: &SystemParams,
    g: f64,
    n_frames: usize,
    master_seed: u64,
) -> Result<(SnirHistogram, SnirHistogram), PlacementError> {
    let (n_users, _) = users_for_load(params, g);
    let channel = ChannelModel::from_snr_db(params.snr_db);
    let collect = |frame_index: usize| -> Result<(Vec<f64>, Vec<f64>), PlacementError> {
        let seed = frame_seed(master_seed, 0, frame_index as u64);
        let frame = place_cra(params, n_users, seed)?;
        let occupancy = build_occupancy(&frame, 0..n_users);
        let mut replica_snirs = Vec::with_capacity(n_users * params.degree);
        let mut combined_snirs = Vec::with_capacity(n_users);
        for u in 0..n_users {
            let profiles: Vec<_> = (0..params.degree)
                .map(|r| replica_profile(&frame, &occupancy, u, r))
                .collect();
            for p in &profiles {
                replica_snirs.push(snir_of(p, &channel).snir_db);
            }
            combined_snirs.push(snir_of(&combined_profile(&profiles), &channel).snir_db);
        }
        Ok((replica_snirs, combined_snirs))
    };

    let per_frame = map_frames(n_frames, collect)?;
    let mut replica_snirs = Vec::new();
    let mut combined_snirs = Vec::new();
    for (r, c) in per_frame {
        replica_snirs.extend(r);
        combined_snirs.extend(c);
    }

    let min_all = replica_snirs
        .iter()
        .chain(&combined_snirs)
        .copied()
        .fold(params.snr_db, f64::min);
    let n_bins = ((params.snr_db - min_all) / SNIR_BIN_DB).floor() as usize + 1;
    Ok((
        bin_samples(&replica_snirs, params.snr_db, n_bins),
        bin_samples(&combined_snirs, params.snr_db, n_bins),
    ))
}

/// CSV header for histogram output.
pub const HISTOGRAM_CSV_HEADER: &str = "bin_lo_db,bin_hi_db,density_cra,density_ecra";

/// Histogram CSV rows; both histograms must share their binning.
pub fn histogram_csv_rows(cra: &SnirHistogram, ecra: &SnirHistogram) -> Vec<String> {
    assert_eq!(cra.edges_db, ecra.edges_db);
    (0..cra.n_bins())
        .map(|i| {
            format!(
                "{},{},{},{}",
                cra.edges_db[i],
                cra.edges_db[i + 1],
                cra.density[i],
                ecra.density[i]
            )
        })
        .collect()
}
