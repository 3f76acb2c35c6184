use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use slabfft::exchange::Strategy;
use slabfft::layout::GlobalGrid;
use slabfft::transport::{CommPattern, Mode};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "slabfft", version, about = "Slab-decomposed 3D FFT: verification and exchange-strategy benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the distributed transform against brute-force references.
    Verify(VerifyArgs),
    /// Time forward+inverse pairs and write per-iteration CSV rows.
    Bench(BenchArgs),
    /// Run both exchange strategies on identical input and compare them.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyName {
    Transpose,
    Strided,
}

impl From<StrategyName> for Strategy {
    fn from(s: StrategyName) -> Self {
        match s {
            StrategyName::Transpose => Strategy::Transpose,
            StrategyName::Strided => Strategy::Strided,
        }
    }
}

impl From<Strategy> for StrategyName {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Transpose => StrategyName::Transpose,
            Strategy::Strided => StrategyName::Strided,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyChoice {
    Strided,
    Transpose,
    Both,
}

impl StrategyChoice {
    pub fn strategies(self) -> Vec<Strategy> {
        match self {
            StrategyChoice::Strided => vec![Strategy::Strided],
            StrategyChoice::Transpose => vec![Strategy::Transpose],
            StrategyChoice::Both => vec![Strategy::Transpose, Strategy::Strided],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternName {
    Pairwise,
    Collective,
}

impl From<PatternName> for CommPattern {
    fn from(p: PatternName) -> Self {
        match p {
            PatternName::Pairwise => CommPattern::Pairwise,
            PatternName::Collective => CommPattern::Collective,
        }
    }
}

impl From<CommPattern> for PatternName {
    fn from(p: CommPattern) -> Self {
        match p {
            CommPattern::Pairwise => PatternName::Pairwise,
            CommPattern::Collective => PatternName::Collective,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeName {
    Threaded,
    Serial,
}

impl From<ModeName> for Mode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Threaded => Mode::Threaded,
            ModeName::Serial => Mode::Serial,
        }
    }
}

/// Options shared by `bench` and `compare`.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Grid extents as n0,n1,n2.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [64, 64, 64])]
    pub size: Vec<usize>,
    #[arg(long, value_enum, default_value_t = PatternName::Pairwise)]
    pub comm: PatternName,
    #[arg(long, value_enum, default_value_t = ModeName::Threaded)]
    pub mode: ModeName,
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    /// Seed for the input field.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl RunArgs {
    pub fn grid(&self) -> Result<GlobalGrid, CliError> {
        parse_grid(&self.size)
    }
}

pub fn parse_grid(size: &[usize]) -> Result<GlobalGrid, CliError> {
    match *size {
        [n0, n1, n2] => GlobalGrid::new(n0, n1, n2).map_err(|e| CliError::Usage(e.to_string())),
        [n] => GlobalGrid::cube(n).map_err(|e| CliError::Usage(e.to_string())),
        _ => Err(CliError::Usage(format!(
            "--size expects n or n0,n1,n2, got {} values",
            size.len()
        ))),
    }
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Largest cube edge to check (at most 32).
    #[arg(long, default_value_t = 8)]
    pub max_size: usize,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [1, 2, 4])]
    pub procs: Vec<usize>,
    #[arg(long, value_enum, default_value_t = StrategyChoice::Both)]
    pub strategy: StrategyChoice,
    #[arg(long, value_enum, default_value_t = PatternName::Pairwise)]
    pub comm: PatternName,
    #[arg(long, value_enum, default_value_t = ModeName::Serial)]
    pub mode: ModeName,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [4])]
    pub procs: Vec<usize>,
    #[arg(long, value_enum, default_value_t = StrategyChoice::Both)]
    pub strategy: StrategyChoice,
    /// CSV destination; rows go to stdout when omitted.
    #[arg(long)]
    pub output: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 4)]
    pub procs: usize,
}
