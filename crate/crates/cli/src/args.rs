use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::Format;

const AFTER_HELP: &str = "\
CSV columns (all commands except counterexample):
  strategy,d,power_db,mse,mse_ci95,avg_power,mu,blocks,seed

  strategy   strict, lthm, ltsm, strict_no_csi, tlb_csi, tlb_no_csi or llb
  d          delay constraint in slots; 0 for rows that do not depend on it
  power_db   average power constraint, 10·log10(P)
  mse        distortion (simulated or closed form)
  mse_ci95   95% batch-means half-width; 0 for closed forms, inf with < 30 blocks
  avg_power  measured (simulated) or allocated (closed form) average power
  mu         power-rule multiplier: λ for strict rows, μ for lthm/ltsm, ζ for llb
  blocks     simulated blocks; 0 for closed forms
  seed       root seed

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 validation failure.";

#[derive(Debug, Parser)]
#[command(name = "ltfade", version, about = "Delay-constrained linear transmission over fading channels", after_help = AFTER_HELP)]
pub struct Cli {
    /// TOML experiment file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory; without it results go to stdout.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Monte Carlo blocks per point.
    #[arg(long, global = true, value_name = "N")]
    pub blocks: Option<usize>,
    /// Powers in dB, e.g. `-5:30:5` or `0,10,-inf`.
    #[arg(long = "power-db", global = true, value_name = "LIST", allow_hyphen_values = true)]
    pub power_db: Option<String>,
    /// Delay constraints, e.g. `1,3,9` or `1:9:2`.
    #[arg(long, global = true, value_name = "LIST")]
    pub delay: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig4,
    Fig5,
    Fig6,
    Fig7,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Analytic,
    Sampled,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal strict-delay allocation (closed form).
    StrictDelay,
    /// Monte Carlo sweep of strategies over delay and power grids.
    Simulate {
        /// Strategies: strict, lthm, ltsm.
        #[arg(long, value_name = "LIST")]
        strategy: Option<String>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long, value_name = "N")]
        calibration_blocks: Option<usize>,
    },
    /// Figure presets; CSV plus SVG.
    Figure {
        #[arg(value_enum)]
        name: Figure,
        #[arg(long, value_name = "N")]
        u_max: Option<usize>,
    },
    /// TLB with and without encoder CSI, and the LLB per delay.
    Bounds {
        /// Largest look-ahead window searched by the LLB.
        #[arg(long, value_name = "N")]
        u_max: Option<usize>,
    },
    /// Strict-delay allocation and TLB without encoder CSI.
    NoCsi,
    /// Two-measurement example without encoder CSI.
    Counterexample {
        #[arg(long, default_value_t = 0.5)]
        p1: f64,
        #[arg(long, default_value_t = 1.0)]
        variance: f64,
        #[arg(long, default_value_t = 1.0)]
        magnitude: f64,
        #[arg(long, default_value_t = 1.0)]
        power: f64,
        /// Power for same-parameter pairs; the rest is shared by the cross pairs.
        #[arg(long)]
        p11: Option<f64>,
        #[arg(long, requires = "p11", requires = "p21")]
        p12: Option<f64>,
        #[arg(long, requires = "p11", requires = "p12")]
        p21: Option<f64>,
    },
    /// Checks analytic against noise-sampled distortion estimates.
    #[command(alias = "validate")]
    CompareModes {
        #[arg(long, value_name = "LIST")]
        strategy: Option<String>,
    },
    /// Re-renders an SVG from a CSV file.
    Render {
        #[arg(value_name = "CSV")]
        csv: PathBuf,
    },
}
