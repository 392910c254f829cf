use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use ecra_sim::config::{self, CliArgs, ExperimentConfig, Mode};
use ecra_sim::decoder::DecodeModel;
use ecra_sim::params::Protocol;
use ecra_sim::scenarios;
use ecra_sim::sic::run_protocol_traced;
use ecra_sim::sweep::{
    histogram_csv_rows, snir_histogram, sweep, sweep_csv_row, SweepStats, HISTOGRAM_CSV_HEADER,
    SWEEP_CSV_HEADER,
};

fn main() -> ExitCode {
    let args = CliArgs::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(args: &CliArgs) -> Result<(), Box<dyn std::error::Error>> {
    let cfg = config::resolve(args)?;
    configure_threads(cfg.jobs);
    match cfg.mode {
        Mode::Sweep => run_sweep(&cfg),
        Mode::Histogram => run_histogram(&cfg),
        Mode::Trace => run_trace(&cfg),
    }
}

#[cfg(feature = "parallel")]
fn configure_threads(jobs: Option<usize>) {
    if let Some(n) = jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not set worker count: {e}");
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(jobs: Option<usize>) {
    if jobs.is_some() {
        eprintln!("warning: built without the 'parallel' feature; --jobs is ignored");
    }
}

/// Writes via a temp file in the same directory plus a rename, so readers
/// never see a partial file.
fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    let tmp = path.with_file_name(format!("{file_name}.tmp"));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)
}

/// PER formatted for the summary table; an exact zero only means the
/// sample size ran out of resolution, so it prints as below the floor.
fn display_per(stats: &SweepStats) -> String {
    if stats.packets_lost == 0 {
        format!("<{:.1e}", stats.per_floor)
    } else {
        format!("{:.3e}", stats.per)
    }
}

fn run_sweep(cfg: &ExperimentConfig) -> Result<(), Box<dyn std::error::Error>> {
    let mut csv = String::from(SWEEP_CSV_HEADER);
    csv.push('\n');
    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "{:<8} {:<6} {:>6} {:>8} {:>6} {:>10} {:>9}",
        "protocol", "model", "G", "G_eff", "N_u", "per", "T"
    )?;
    for &protocol in &cfg.protocols {
        let params = cfg.system_params(protocol);
        let stats = sweep(&params, &cfg.g_grid, cfg.n_frames, cfg.master_seed)?;
        for s in &stats {
            csv.push_str(&sweep_csv_row(&params, s));
            csv.push('\n');
            writeln!(
                stdout,
                "{:<8} {:<6} {:>6.3} {:>8.4} {:>6} {:>10} {:>9.4}",
                protocol.as_str(),
                params.decode_model.as_str(),
                s.g_nominal,
                s.g_effective,
                s.n_users,
                display_per(s),
                s.throughput
            )?;
        }
    }
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("sweep.csv"));
    write_atomic(&out, &csv)?;
    writeln!(stdout, "wrote {}", out.display())?;
    Ok(())
}

fn run_histogram(cfg: &ExperimentConfig) -> Result<(), Box<dyn std::error::Error>> {
    let g = cfg.g_grid[0];
    // The histogram compares per-replica and combined SNIRs on identical
    // unslotted frames, so the protocol list does not matter here.
    let params = cfg.system_params(Protocol::Ecra);
    let (cra, ecra) = snir_histogram(&params, g, cfg.n_frames, cfg.master_seed)?;
    let mut csv = String::from(HISTOGRAM_CSV_HEADER);
    csv.push('\n');
    for row in histogram_csv_rows(&cra, &ecra) {
        csv.push_str(&row);
        csv.push('\n');
    }
    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("histogram.csv"));
    write_atomic(&out, &csv)?;
    println!(
        "snir densities at G = {g} over {} frames: {} bins of {} dB down from {} dB",
        cfg.n_frames,
        cra.n_bins(),
        ecra_sim::sweep::SNIR_BIN_DB,
        params.snr_db
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn run_trace(cfg: &ExperimentConfig) -> Result<(), Box<dyn std::error::Error>> {
    let mut text = String::new();
    for &protocol in &cfg.protocols {
        let params = cfg.system_params(protocol);
        let frame = match protocol {
            Protocol::Crdsa => scenarios::slotted_loop(&params)?,
            _ => scenarios::unslotted_loop(&params)?,
        };
        let model = DecodeModel::from_params(&frame.params, &frame.geometry);
        let (state, events) = run_protocol_traced(&frame, &model);
        text.push_str(&format!("=== {protocol} loop scenario ===\n"));
        text.push_str(&frame.dump_placements());
        for e in &events {
            text.push_str(&format!("{e}\n"));
        }
        text.push_str(&format!(
            "decoded {} of {} users in {} passes\n\n",
            state.n_decoded(),
            frame.n_users(),
            state.iterations
        ));
    }
    print!("{text}");
    if let Some(out) = &cfg.out {
        write_atomic(out, &text)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
