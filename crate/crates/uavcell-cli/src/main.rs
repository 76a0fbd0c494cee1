//! Command-line driver: Monte Carlo experiments, antenna gain sweeps and
//! association dumps.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use uavcell::config::{CsiMode, ModeTag, SimConfig, UavHeightSetting, UniformKeyword};
use uavcell::harness::{self, run_experiment};

#[derive(Parser)]
#[command(name = "uavcell", version, about = "System-level cellular simulator for ground and UAV users")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write rates.csv / cdf.csv / summary.txt.
    Simulate(SimulateArgs),
    /// Emit the composite analog beam gain versus 2D distance (CSV).
    AntennaSweep(AntennaSweepArgs),
    /// Dump one drop's association map (CSV).
    AssocMap(AssocMapArgs),
    /// Dump per-user channel estimation error for one multi-user drop (CSV).
    EstError(EstErrorArgs),
    /// Print the default configuration as TOML.
    DefaultConfig {
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Configuration file (TOML). Omitted sections use defaults.
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of drops.
    #[arg(long)]
    drops: Option<usize>,
    /// Override the deployment mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ModeTag>,
    /// Override the CSI regime (multi-user mode).
    #[arg(long, value_parser = parse_csi)]
    csi: Option<CsiMode>,
    /// Override the UAV height policy: a height in metres or "uniform"/"range".
    #[arg(long, value_parser = parse_height)]
    uav_height: Option<UavHeightSetting>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AntennaSweepArgs {
    /// User height, metres.
    #[arg(long)]
    height: f64,
    /// Maximum 2D distance, metres.
    #[arg(long, default_value_t = 1500.0)]
    max_distance: f64,
    /// Sweep step, metres.
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AssocMapArgs {
    /// Configuration file (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Fix all UAVs at this height, metres.
    #[arg(long)]
    uav_height: Option<f64>,
    /// Drop index to dump.
    #[arg(long, default_value_t = 0)]
    drop: u64,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstErrorArgs {
    /// Configuration file (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the CSI regime.
    #[arg(long, value_parser = parse_csi)]
    csi: Option<CsiMode>,
    /// Drop index to dump.
    #[arg(long, default_value_t = 0)]
    drop: u64,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

fn parse_mode(s: &str) -> Result<ModeTag, String> {
    match s {
        "su" => Ok(ModeTag::Su),
        "mu" => Ok(ModeTag::Mu),
        _ => Err(format!("unknown mode {s:?} (expected su|mu)")),
    }
}

fn parse_csi(s: &str) -> Result<CsiMode, String> {
    match s {
        "perfect" => Ok(CsiMode::Perfect),
        "r3pc" => Ok(CsiMode::Reuse3PowerControl),
        "r3ep" => Ok(CsiMode::Reuse3EqualPower),
        _ => Err(format!("unknown csi regime {s:?} (expected perfect|r3pc|r3ep)")),
    }
}

fn parse_height(s: &str) -> Result<UavHeightSetting, String> {
    match s {
        "uniform" | "range" => Ok(UavHeightSetting::Keyword(UniformKeyword::Uniform)),
        v => v
            .parse::<f64>()
            .map(UavHeightSetting::Fixed)
            .map_err(|_| format!("expected a height in metres or \"uniform\", got {v:?}")),
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<SimConfig> {
    match path {
        None => Ok(SimConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read config {}", p.display()))?;
            SimConfig::from_toml(&text).context("invalid configuration")
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => {
            let mut cfg = load_config(Some(&args.config))?;
            if let Some(seed) = args.seed {
                cfg.run.master_seed = seed;
            }
            if let Some(drops) = args.drops {
                cfg.run.drops = drops;
            }
            if let Some(mode) = args.mode {
                cfg.run.mode = mode;
            }
            if let Some(csi) = args.csi {
                if cfg.run.mode == ModeTag::Su {
                    log::warn!("--csi is ignored in single-user mode");
                }
                cfg.run.csi = csi;
            }
            if let Some(h) = args.uav_height {
                cfg.run.uav_height = h;
            }
            cfg.validate().context("invalid configuration")?;
            let summary = run_experiment(&cfg)?;
            summary
                .emit_outputs(&args.out)
                .with_context(|| format!("cannot write outputs to {}", args.out.display()))?;
            print!("{}", summary.summary_text());
            Ok(())
        }
        Command::AntennaSweep(args) => {
            if args.step <= 0.0 || args.max_distance <= 0.0 {
                bail!("--step and --max-distance must be positive");
            }
            let cfg = SimConfig::default();
            let csv = harness::antenna_sweep_csv(&cfg, args.height, args.max_distance, args.step)?;
            std::fs::write(&args.out, csv)
                .with_context(|| format!("cannot write {}", args.out.display()))?;
            Ok(())
        }
        Command::AssocMap(args) => {
            let mut cfg = load_config(args.config.as_ref())?;
            if let Some(seed) = args.seed {
                cfg.run.master_seed = seed;
            }
            if let Some(h) = args.uav_height {
                cfg.run.uav_height = UavHeightSetting::Fixed(h);
            }
            let csv = harness::association_dump(&cfg, args.drop)?;
            std::fs::write(&args.out, csv)
                .with_context(|| format!("cannot write {}", args.out.display()))?;
            Ok(())
        }
        Command::EstError(args) => {
            let mut cfg = load_config(args.config.as_ref())?;
            cfg.run.mode = ModeTag::Mu;
            if let Some(csi) = args.csi {
                cfg.run.csi = csi;
            }
            let csv = harness::estimation_error_dump(&cfg, args.drop)?;
            std::fs::write(&args.out, csv)
                .with_context(|| format!("cannot write {}", args.out.display()))?;
            Ok(())
        }
        Command::DefaultConfig { out } => {
            let text = SimConfig::default().to_toml()?;
            match out {
                Some(p) => std::fs::write(&p, text)
                    .with_context(|| format!("cannot write {}", p.display()))?,
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}
