use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "conv-memsim",
    version,
    about = "Simulate tiled GPU convolution kernels at memory-transaction level"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the reference convolution on tensor files.
    Oracle(OracleArgs),
    /// Run one kernel emulation and report its metrics.
    Run(RunArgs),
    /// Run a parameter grid described by a spec file and emit CSV.
    Sweep(SweepArgs),
    /// Check a kernel configuration against the resource limits.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum KernelKind {
    General,
    Special,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::General => "general",
            KernelKind::Special => "special",
        }
    }
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub filters: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct ModelArgs {
    /// Shared-memory bank width in bytes.
    #[arg(long = "bank-width", default_value_t = 8)]
    pub bank_width: u32,
    /// Element width in bytes.
    #[arg(long = "elem-width", default_value_t = 4)]
    pub elem_width: u32,
}

/// Tiling flags; which ones are needed depends on the kernel.
#[derive(Debug, Clone, Copy, Default, Args)]
pub struct ConfigArgs {
    #[arg(long = "W")]
    pub w: Option<usize>,
    #[arg(long = "H")]
    pub h: Option<usize>,
    /// Vector width (special kernel); defaults to the model's.
    #[arg(long = "n")]
    pub n: Option<usize>,
    #[arg(long = "F_TB")]
    pub f_tb: Option<usize>,
    #[arg(long = "W_T")]
    pub w_t: Option<usize>,
    #[arg(long = "F_T")]
    pub f_t: Option<usize>,
    #[arg(long = "C_SH")]
    pub c_sh: Option<usize>,
    /// Filter-tile row padding; chosen automatically when omitted.
    #[arg(long = "pad")]
    pub pad: Option<usize>,
    /// Disable the one-row prefetch of the special kernel.
    #[arg(long = "no-prefetch")]
    pub no_prefetch: bool,
}

/// `N,C,K,F` for a generated problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenShape {
    pub n: usize,
    pub c: usize,
    pub k: usize,
    pub f: usize,
}

impl FromStr for GenShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<Result<_, _>>()?;
        match v[..] {
            [n, c, k, f] if v.iter().all(|&x| x > 0) => Ok(GenShape { n, c, k, f }),
            _ => Err("expected four positive integers N,C,K,F".into()),
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub kernel: KernelKind,
    #[arg(long, requires = "filters", conflicts_with = "gen")]
    pub image: Option<PathBuf>,
    #[arg(long, requires = "image")]
    pub filters: Option<PathBuf>,
    /// Generate a seeded N×N image with C channels and F filters of size K.
    #[arg(long, value_name = "N,C,K,F", required_unless_present = "image")]
    pub gen: Option<GenShape>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Use one element per lane (special kernel only).
    #[arg(long)]
    pub unmatched: bool,
    /// Write the metrics CSV (header and one row) here.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Write per-phase request counts as CSV here.
    #[arg(long)]
    pub phases: Option<PathBuf>,
    /// Write the output tensor here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Overrides the spec's `output` key; `-` prints to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, value_enum)]
    pub kernel: KernelKind,
    /// Filter size.
    #[arg(long = "K")]
    pub k: usize,
    /// Input channels (default: 1 for special, C_SH for general).
    #[arg(long = "C")]
    pub c: Option<usize>,
    /// Filter count (default: 1 for special, F_TB for general).
    #[arg(long = "F")]
    pub f: Option<usize>,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}
