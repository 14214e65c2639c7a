use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "digitdrift",
    version,
    about = "Exact laws of the base-b sum-of-digits variation s(n + r) - s(n)"
)]
pub struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "DIGITDRIFT_JOBS")]
    pub jobs: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Directory of cached distributions.
    #[arg(long, global = true, env = "DIGITDRIFT_CACHE", default_value = "cache")]
    pub cache_dir: PathBuf,

    /// Neither read nor write the distribution cache.
    #[arg(long, global = true)]
    pub no_cache: bool,

    /// Read r as a digit string in the chosen base, most-significant digit
    /// first (`0-9a-z`, or comma-separated decimal digits).
    #[arg(long, global = true)]
    pub radix_input: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact atoms, tail mass, mean enclosure, variance and σ of μ^(r).
    Dist(DistArgs),
    /// Sweep invariant checks over a range or a random sample of r.
    Verify(VerifyArgs),
    /// Monte Carlo histogram of Δ^(r) against the exact atoms.
    Simulate(SimulateArgs),
    /// Normal-approximation rate report over a family of r.
    Clt(CltArgs),
    /// Estimated φ-mixing coefficients of the block process.
    Phi(PhiArgs),
    /// Block decomposition of r.
    Blocks(BlocksArgs),
}

#[derive(Debug, Args)]
pub struct DistArgs {
    pub r: String,
    #[arg(long, default_value_t = 10)]
    pub base: u32,
    /// Number of atoms to compute exactly.
    #[arg(long, conflicts_with = "tail_eps")]
    pub atoms: Option<usize>,
    /// Compute enough atoms for the certified tail bound to drop below this.
    #[arg(long)]
    pub tail_eps: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Check {
    Recursion,
    Reverse,
    Bounds,
    Enclosure,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Recursion => "recursion",
            Check::Reverse => "reverse",
            Check::Bounds => "bounds",
            Check::Enclosure => "enclosure",
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Inclusive range `a..b` of decimal integers.
    #[arg(required_unless_present = "random", conflicts_with = "random")]
    pub range: Option<String>,
    /// Check this many random r instead of a range.
    #[arg(long, requires = "digits")]
    pub random: Option<usize>,
    /// Digit count of the random r.
    #[arg(long)]
    pub digits: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub base: u32,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "recursion,reverse,bounds,enclosure"
    )]
    pub checks: Vec<Check>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub r: String,
    #[arg(long, default_value_t = 10)]
    pub base: u32,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also tabulate the block increments X_1..X_λ and their sum.
    #[arg(long)]
    pub process: bool,
    /// Digits a carry may run past the top of r before a sample is rejected.
    #[arg(long, default_value_t = digitdrift_core::odometer::DEFAULT_PROPAGATION_CAP)]
    pub cap: usize,
}

#[derive(Debug, Args)]
pub struct CltArgs {
    /// `pattern@m1,m2,...`: the digit pattern (most-significant first)
    /// repeated m times for each listed m.
    #[arg(long, conflicts_with = "list")]
    pub family: Option<String>,
    /// File with one r per line.
    #[arg(long)]
    pub list: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub base: u32,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Largest allowed growth of a normalized column over its value at the
    /// first family member.
    #[arg(long, default_value_t = 10.0)]
    pub bound_factor: f64,
}

#[derive(Debug, Args)]
pub struct PhiArgs {
    /// Defaults to the pattern `10` repeated 16 times.
    pub r: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub base: u32,
    #[arg(long, value_delimiter = ',', default_value = "3,4,5,6,7,8,9,10")]
    pub k: Vec<usize>,
    /// Split points: the past is X_1..X_p.
    #[arg(long, value_delimiter = ',', default_value = "1,4")]
    pub p: Vec<usize>,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Block indices per side used to build conditioning events.
    #[arg(long, default_value_t = 2)]
    pub per_side: usize,
    #[arg(long, default_value_t = digitdrift_core::odometer::DEFAULT_PROPAGATION_CAP)]
    pub cap: usize,
}

#[derive(Debug, Args)]
pub struct BlocksArgs {
    pub r: String,
    #[arg(long, default_value_t = 10)]
    pub base: u32,
}
