//! Experiment configuration for the command-line front end.
//!
//! Configuration comes from a flat `key = value` text file, environment
//! variables (`ECRA_SIM_*`) and command-line flags, in increasing order of
//! precedence. Unset values fall back to the reference campaign defaults.

use std::path::PathBuf;

use clap::Parser;
use thiserror::Error;

use crate::params::{
    derive_geometry, DecodeModelKind, ParamError, Protocol, SystemParams,
};

/// What an invocation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Throughput/PER sweep over the load grid, CSV output.
    Sweep,
    /// SNIR density at a single load point, CSV output.
    Histogram,
    /// Decode a constructed loop scenario with a human-readable log.
    Trace,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Sweep => "sweep",
            Mode::Histogram => "histogram",
            Mode::Trace => "trace",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sweep" => Ok(Mode::Sweep),
            "histogram" => Ok(Mode::Histogram),
            "trace" => Ok(Mode::Trace),
            other => Err(format!(
                "unknown mode '{other}' (expected sweep, histogram or trace)"
            )),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line}: unknown key '{key}'")]
    UnknownKey { key: String, line: usize },
    #[error("config line {line}: '{key}': {reason}")]
    BadValue {
        key: String,
        line: usize,
        reason: String,
    },
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Command-line flags. Every value is optional; unset flags defer to the
/// config file and then to the defaults.
#[derive(Debug, Clone, Default, Parser)]
#[command(
    name = "ecra-sim",
    about = "Monte-Carlo simulator for SIC random access protocols (CRA, ECRA, CRDSA)",
    long_about = None
)]
pub struct CliArgs {
    /// Flat key=value config file; flags and ECRA_SIM_* env vars override it.
    #[arg(long, env = "ECRA_SIM_CONFIG")]
    pub config: Option<PathBuf>,
    /// Comma-separated protocols to run: cra, ecra, crdsa.
    #[arg(long, env = "ECRA_SIM_PROTOCOL", value_delimiter = ',')]
    pub protocol: Option<Vec<Protocol>>,
    /// Decode model: sb (Shannon bound) or rcb (random coding bound).
    #[arg(long, env = "ECRA_SIM_MODEL")]
    pub model: Option<DecodeModelKind>,
    /// Rate in bits per symbol.
    #[arg(long, env = "ECRA_SIM_RATE")]
    pub rate: Option<f64>,
    /// Nominal per-user SNR in dB.
    #[arg(long, env = "ECRA_SIM_SNR_DB")]
    pub snr_db: Option<f64>,
    /// Frame duration in milliseconds.
    #[arg(long, env = "ECRA_SIM_FRAME_MS")]
    pub frame_ms: Option<f64>,
    /// Symbol duration in microseconds.
    #[arg(long, env = "ECRA_SIM_SYMBOL_US")]
    pub symbol_us: Option<f64>,
    /// Packet length in bits.
    #[arg(long, env = "ECRA_SIM_PACKET_BITS")]
    pub packet_bits: Option<u64>,
    /// Replicas per user per frame.
    #[arg(long, env = "ECRA_SIM_DEGREE")]
    pub degree: Option<usize>,
    /// Cap on SIC passes (combining sweeps included).
    #[arg(long, env = "ECRA_SIM_IMAX")]
    pub imax: Option<usize>,
    /// Lowest load in the sweep grid (Erlang).
    #[arg(long, env = "ECRA_SIM_G_MIN")]
    pub g_min: Option<f64>,
    /// Highest load in the sweep grid (Erlang).
    #[arg(long, env = "ECRA_SIM_G_MAX")]
    pub g_max: Option<f64>,
    /// Grid step (Erlang).
    #[arg(long, env = "ECRA_SIM_G_STEP")]
    pub g_step: Option<f64>,
    /// Frames simulated per load point.
    #[arg(long, env = "ECRA_SIM_FRAMES")]
    pub frames: Option<usize>,
    /// Master seed; every frame derives its own stream from it.
    #[arg(long, env = "ECRA_SIM_SEED")]
    pub seed: Option<u64>,
    /// Output CSV path (sweep/histogram) or trace file.
    #[arg(long, env = "ECRA_SIM_OUT")]
    pub out: Option<PathBuf>,
    /// sweep, histogram or trace.
    #[arg(long, env = "ECRA_SIM_MODE")]
    pub mode: Option<Mode>,
    /// Worker threads for frame parallelism (default: all cores).
    #[arg(long, env = "ECRA_SIM_JOBS")]
    pub jobs: Option<usize>,
}

/// Values read from a config file; unset keys stay `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    pub protocol: Option<Vec<Protocol>>,
    pub model: Option<DecodeModelKind>,
    pub rate: Option<f64>,
    pub snr_db: Option<f64>,
    pub frame_ms: Option<f64>,
    pub symbol_us: Option<f64>,
    pub packet_bits: Option<u64>,
    pub degree: Option<usize>,
    pub imax: Option<usize>,
    pub g_min: Option<f64>,
    pub g_max: Option<f64>,
    pub g_step: Option<f64>,
    pub g_list: Option<Vec<f64>>,
    pub frames: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mode: Option<Mode>,
    pub jobs: Option<usize>,
}

impl FileConfig {
    /// Parses the flat `key = value` format. Blank lines and `#` comments
    /// are ignored; unknown keys are errors.
    pub fn parse(text: &str) -> Result<FileConfig, ConfigError> {
        let mut out = FileConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or_else(|| ConfigError::BadValue {
                key: stripped.to_string(),
                line,
                reason: "expected 'key = value'".to_string(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |reason: String| ConfigError::BadValue {
                key: key.to_string(),
                line,
                reason,
            };
            match key {
                "protocol" => {
                    let mut ps = Vec::new();
                    for part in value.split(',') {
                        ps.push(part.trim().parse::<Protocol>().map_err(&bad)?);
                    }
                    out.protocol = Some(ps);
                }
                "model" => out.model = Some(value.parse().map_err(&bad)?),
                "rate" => out.rate = Some(parse_num(value).map_err(&bad)?),
                "snr_db" => out.snr_db = Some(parse_num(value).map_err(&bad)?),
                "frame_ms" => out.frame_ms = Some(parse_num(value).map_err(&bad)?),
                "symbol_us" => out.symbol_us = Some(parse_num(value).map_err(&bad)?),
                "packet_bits" => out.packet_bits = Some(parse_num(value).map_err(&bad)?),
                "degree" => out.degree = Some(parse_num(value).map_err(&bad)?),
                "imax" => out.imax = Some(parse_num(value).map_err(&bad)?),
                "g_min" => out.g_min = Some(parse_num(value).map_err(&bad)?),
                "g_max" => out.g_max = Some(parse_num(value).map_err(&bad)?),
                "g_step" => out.g_step = Some(parse_num(value).map_err(&bad)?),
                "g_list" => {
                    let mut gs = Vec::new();
                    for part in value.split(',') {
                        gs.push(parse_num::<f64>(part.trim()).map_err(&bad)?);
                    }
                    out.g_list = Some(gs);
                }
                "frames" => out.frames = Some(parse_num(value).map_err(&bad)?),
                "seed" => out.seed = Some(parse_num(value).map_err(&bad)?),
                "out" => out.out = Some(PathBuf::from(value)),
                "mode" => out.mode = Some(value.parse().map_err(&bad)?),
                "jobs" => out.jobs = Some(parse_num(value).map_err(&bad)?),
                _ => {
                    return Err(ConfigError::UnknownKey {
                        key: key.to_string(),
                        line,
                    })
                }
            }
        }
        Ok(out)
    }
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| format!("cannot parse '{s}': {e}"))
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub protocols: Vec<Protocol>,
    pub model: DecodeModelKind,
    pub rate: f64,
    pub snr_db: f64,
    pub frame_ms: f64,
    pub symbol_us: f64,
    pub packet_bits: u64,
    pub degree: usize,
    pub imax: usize,
    pub g_grid: Vec<f64>,
    pub n_frames: usize,
    pub master_seed: u64,
    pub out: Option<PathBuf>,
    pub mode: Mode,
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    /// System parameters for one of the configured protocols.
    pub fn system_params(&self, protocol: Protocol) -> SystemParams {
        SystemParams {
            rate: self.rate,
            snr_db: self.snr_db,
            frame_duration: self.frame_ms * 1e-3,
            symbol_duration: self.symbol_us * 1e-6,
            packet_bits: self.packet_bits,
            degree: self.degree,
            max_sic_iterations: self.imax,
            protocol,
            decode_model: self.model,
        }
    }

    /// Serializes back to the flat key=value format; reparsing the result
    /// yields an identical configuration.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let protocols: Vec<&str> = self.protocols.iter().map(|p| p.as_str()).collect();
        s.push_str(&format!("protocol = {}\n", protocols.join(",")));
        s.push_str(&format!("model = {}\n", self.model));
        s.push_str(&format!("rate = {}\n", self.rate));
        s.push_str(&format!("snr_db = {}\n", self.snr_db));
        s.push_str(&format!("frame_ms = {}\n", self.frame_ms));
        s.push_str(&format!("symbol_us = {}\n", self.symbol_us));
        s.push_str(&format!("packet_bits = {}\n", self.packet_bits));
        s.push_str(&format!("degree = {}\n", self.degree));
        s.push_str(&format!("imax = {}\n", self.imax));
        let grid: Vec<String> = self.g_grid.iter().map(|g| g.to_string()).collect();
        s.push_str(&format!("g_list = {}\n", grid.join(",")));
        s.push_str(&format!("frames = {}\n", self.n_frames));
        s.push_str(&format!("seed = {}\n", self.master_seed));
        s.push_str(&format!("mode = {}\n", self.mode));
        if let Some(out) = &self.out {
            s.push_str(&format!("out = {}\n", out.display()));
        }
        if let Some(jobs) = self.jobs {
            s.push_str(&format!("jobs = {jobs}\n"));
        }
        s
    }
}

/// Reference campaign defaults.
mod defaults {
    pub const RATE: f64 = 2.0;
    pub const SNR_DB: f64 = 10.0;
    pub const FRAME_MS: f64 = 100.0;
    pub const SYMBOL_US: f64 = 1.0;
    pub const PACKET_BITS: u64 = 1000;
    pub const DEGREE: usize = 2;
    pub const IMAX: usize = 10;
    pub const FRAMES: usize = 1000;
    pub const SEED: u64 = 1;
    pub const G_MIN: f64 = 0.05;
    pub const G_MAX: f64 = 1.0;
    pub const G_STEP: f64 = 0.05;
    pub const G_HISTOGRAM: f64 = 1.0;
}

/// Merges flags over file values over defaults and validates the result.
pub fn merge(file: &FileConfig, args: &CliArgs) -> Result<ExperimentConfig, ConfigError> {
    let mode = args.mode.or(file.mode).unwrap_or(Mode::Sweep);

    // Any grid flag rebuilds the grid from min/max/step; otherwise an
    // explicit file list wins over the file trio.
    let flags_have_grid = args.g_min.is_some() || args.g_max.is_some() || args.g_step.is_some();
    let trio_set = flags_have_grid || file.g_min.is_some() || file.g_max.is_some() || file.g_step.is_some();
    let g_grid = if !flags_have_grid && file.g_list.is_some() {
        file.g_list.clone().unwrap()
    } else if trio_set {
        let min = args.g_min.or(file.g_min).unwrap_or(defaults::G_MIN);
        let max = args.g_max.or(file.g_max).unwrap_or(defaults::G_MAX);
        let step = args.g_step.or(file.g_step).unwrap_or(defaults::G_STEP);
        grid_from_range(min, max, step)?
    } else if mode == Mode::Histogram {
        vec![defaults::G_HISTOGRAM]
    } else {
        grid_from_range(defaults::G_MIN, defaults::G_MAX, defaults::G_STEP)?
    };

    if let Some(&g) = g_grid.iter().find(|&&g| !(g >= 0.0) || !g.is_finite()) {
        return Err(ConfigError::Invalid {
            what: "load grid",
            reason: format!("load {g} is not a non-negative finite number"),
        });
    }
    if mode == Mode::Histogram && g_grid.len() != 1 {
        return Err(ConfigError::Invalid {
            what: "load grid",
            reason: "histogram mode needs exactly one load point".to_string(),
        });
    }

    let n_frames = args.frames.or(file.frames).unwrap_or(defaults::FRAMES);
    if n_frames < 1 {
        return Err(ConfigError::Invalid {
            what: "frames",
            reason: "at least one frame per load point is required".to_string(),
        });
    }

    let config = ExperimentConfig {
        protocols: args
            .protocol
            .clone()
            .or_else(|| file.protocol.clone())
            .unwrap_or_else(|| vec![Protocol::Cra, Protocol::Ecra, Protocol::Crdsa]),
        model: args.model.or(file.model).unwrap_or(DecodeModelKind::ShannonBound),
        rate: args.rate.or(file.rate).unwrap_or(defaults::RATE),
        snr_db: args.snr_db.or(file.snr_db).unwrap_or(defaults::SNR_DB),
        frame_ms: args.frame_ms.or(file.frame_ms).unwrap_or(defaults::FRAME_MS),
        symbol_us: args.symbol_us.or(file.symbol_us).unwrap_or(defaults::SYMBOL_US),
        packet_bits: args.packet_bits.or(file.packet_bits).unwrap_or(defaults::PACKET_BITS),
        degree: args.degree.or(file.degree).unwrap_or(defaults::DEGREE),
        imax: args.imax.or(file.imax).unwrap_or(defaults::IMAX),
        g_grid,
        n_frames,
        master_seed: args.seed.or(file.seed).unwrap_or(defaults::SEED),
        out: args.out.clone().or_else(|| file.out.clone()),
        mode,
        jobs: args.jobs.or(file.jobs),
    };

    // Geometry invariants, checked once per configured protocol.
    for &p in &config.protocols {
        derive_geometry(&config.system_params(p))?;
    }
    if config.protocols.is_empty() {
        return Err(ConfigError::Invalid {
            what: "protocol",
            reason: "at least one protocol is required".to_string(),
        });
    }
    Ok(config)
}

fn grid_from_range(min: f64, max: f64, step: f64) -> Result<Vec<f64>, ConfigError> {
    if !(step > 0.0) {
        return Err(ConfigError::Invalid {
            what: "load grid",
            reason: format!("g_step must be > 0, got {step}"),
        });
    }
    if max < min {
        return Err(ConfigError::Invalid {
            what: "load grid",
            reason: format!("g_max {max} is below g_min {min}"),
        });
    }
    let n = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| min + i as f64 * step).collect())
}

/// Loads the config file named by the flags (if any) and resolves the
/// final configuration.
pub fn resolve(args: &CliArgs) -> Result<ExperimentConfig, ConfigError> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            FileConfig::parse(&text)?
        }
        None => FileConfig::default(),
    };
    merge(&file, args)
}

/// As [`resolve`], with the file contents supplied directly.
pub fn parse_config(file_text: Option<&str>, args: &CliArgs) -> Result<ExperimentConfig, ConfigError> {
    let file = match file_text {
        Some(text) => FileConfig::parse(text)?,
        None => FileConfig::default(),
    };
    merge(&file, args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_flags_yield_reference_campaign() {
        let cfg = parse_config(None, &CliArgs::default()).unwrap();
        assert_eq!(
            cfg.protocols,
            vec![Protocol::Cra, Protocol::Ecra, Protocol::Crdsa]
        );
        assert_eq!(cfg.model, DecodeModelKind::ShannonBound);
        assert_eq!(cfg.rate, 2.0);
        assert_eq!(cfg.snr_db, 10.0);
        assert_eq!(cfg.frame_ms, 100.0);
        assert_eq!(cfg.symbol_us, 1.0);
        assert_eq!(cfg.packet_bits, 1000);
        assert_eq!(cfg.degree, 2);
        assert_eq!(cfg.imax, 10);
        assert_eq!(cfg.n_frames, 1000);
        assert_eq!(cfg.mode, Mode::Sweep);
        assert_eq!(cfg.g_grid.len(), 20);
        assert!((cfg.g_grid[0] - 0.05).abs() < 1e-12);
        assert!((cfg.g_grid[19] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reduced_snr_campaign_via_flags() {
        let args = CliArgs {
            rate: Some(1.0),
            snr_db: Some(2.0),
            ..CliArgs::default()
        };
        let cfg = parse_config(None, &args).unwrap();
        assert_eq!(cfg.rate, 1.0);
        assert_eq!(cfg.snr_db, 2.0);
        let params = cfg.system_params(Protocol::Ecra);
        assert_eq!(derive_geometry(&params).unwrap().packet_symbols, 1000);
    }

    #[test]
    fn degree_one_is_rejected() {
        let args = CliArgs {
            degree: Some(1),
            ..CliArgs::default()
        };
        let err = parse_config(None, &args).unwrap_err();
        assert!(matches!(err, ConfigError::Param(ParamError::DegreeTooSmall(1))));
    }

    #[test]
    fn flags_override_file_values() {
        let file = "rate = 1\nsnr_db = 2\nframes = 77\n";
        let args = CliArgs {
            snr_db: Some(6.0),
            ..CliArgs::default()
        };
        let cfg = parse_config(Some(file), &args).unwrap();
        assert_eq!(cfg.rate, 1.0);
        assert_eq!(cfg.snr_db, 6.0);
        assert_eq!(cfg.n_frames, 77);
    }

    #[test]
    fn unknown_key_is_reported_with_its_name() {
        let err = FileConfig::parse("ratee = 2\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { key, line } => {
                assert_eq!(key, "ratee");
                assert_eq!(line, 1);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let file = "# campaign\n\nrate = 1 # bits per symbol\n";
        let cfg = FileConfig::parse(file).unwrap();
        assert_eq!(cfg.rate, Some(1.0));
    }

    #[test]
    fn file_grid_list_is_used_without_grid_flags() {
        let file = "g_list = 0.5, 1.0, 1.5\n";
        let cfg = parse_config(Some(file), &CliArgs::default()).unwrap();
        assert_eq!(cfg.g_grid, vec![0.5, 1.0, 1.5]);
        // A grid flag rebuilds the grid from the trio instead.
        let args = CliArgs {
            g_min: Some(0.2),
            g_max: Some(0.4),
            g_step: Some(0.1),
            ..CliArgs::default()
        };
        let cfg = parse_config(Some(file), &args).unwrap();
        assert_eq!(cfg.g_grid.len(), 3);
        assert!((cfg.g_grid[2] - 0.4).abs() < 1e-9);
    }

    #[test]
    fn histogram_mode_defaults_to_single_point() {
        let args = CliArgs {
            mode: Some(Mode::Histogram),
            ..CliArgs::default()
        };
        let cfg = parse_config(None, &args).unwrap();
        assert_eq!(cfg.g_grid, vec![1.0]);

        let args = CliArgs {
            mode: Some(Mode::Histogram),
            g_min: Some(0.5),
            g_max: Some(1.0),
            g_step: Some(0.5),
            ..CliArgs::default()
        };
        assert!(parse_config(None, &args).is_err());
    }

    #[test]
    fn invalid_grid_bounds_are_rejected() {
        let args = CliArgs {
            g_step: Some(0.0),
            ..CliArgs::default()
        };
        assert!(parse_config(None, &args).is_err());
        let err = FileConfig::parse("g_list = -0.5\n")
            .and_then(|f| merge(&f, &CliArgs::default()));
        assert!(err.is_err());
    }

    #[test]
    fn config_round_trips_through_serialization() {
        let args = CliArgs {
            protocol: Some(vec![Protocol::Ecra, Protocol::Crdsa]),
            model: Some(DecodeModelKind::RandomCodingBound),
            rate: Some(1.0),
            g_min: Some(0.1),
            g_max: Some(0.35),
            g_step: Some(0.05),
            out: Some(PathBuf::from("runs/out.csv")),
            jobs: Some(3),
            ..CliArgs::default()
        };
        let cfg = parse_config(None, &args).unwrap();
        let text = cfg.serialize();
        let reparsed = parse_config(Some(&text), &CliArgs::default()).unwrap();
        assert_eq!(cfg, reparsed);
    }
}
