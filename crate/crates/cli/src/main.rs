//! `ccucp`: reproducible experiments on the chance-constrained unit
//! commitment problem.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "ccucp", version, about = "Chance-constrained unit commitment experiments")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write a gnuplot script next to each CSV.
    #[arg(long, global = true)]
    gnuplot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Draw demand scenarios.
    Sample(SampleArgs),
    /// Solve a deterministic or scenario instance.
    Solve(SolveArgs),
    /// Cost against reliability level over regimes and seeds.
    SweepP(SweepArgs),
    /// Compile an instance to a QUBO.
    Compile(CompileArgs),
    /// Anneal a QUBO and decode the samples.
    Anneal(AnnealArgs),
    /// Tune the penalty weights.
    Tune(TuneArgs),
}

/// Which instance to load and, for Gaussian demand, which scenarios.
#[derive(Args, Debug, Clone, Serialize)]
pub struct ProblemArgs {
    /// Built-in instance (`deterministic` or `stochastic`).
    #[arg(long, conflicts_with = "instance")]
    pub builtin: Option<String>,
    /// Instance JSON file.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Scenario CSV; sampled with `--n` and `--seed` when absent.
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    /// Number of scenarios to sample.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Correlation regime of the built-in stochastic instance.
    #[arg(long, default_value = "moderate")]
    pub regime: String,
    /// Reliability level.
    #[arg(long, default_value_t = 0.9)]
    pub p_level: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct SampleArgs {
    /// Built-in instance; only `stochastic` has Gaussian demand.
    #[arg(long, conflicts_with = "instance")]
    pub builtin: Option<String>,
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, env = "CCUCP_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "moderate")]
    pub regime: String,
}

#[derive(Args, Debug, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Proven optimum.
    #[arg(long, conflicts_with = "greedy")]
    pub exact: bool,
    /// Greedy scenario dropping; for large scenario sets.
    #[arg(long)]
    pub greedy: bool,
    #[arg(long, env = "CCUCP_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    /// Comma-separated reliability levels.
    #[arg(long, value_delimiter = ',', required = true)]
    pub p_grid: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Comma-separated sampling seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    /// Comma-separated correlation regimes.
    #[arg(long, value_delimiter = ',', default_value = "none,moderate,strong")]
    pub regimes: Vec<String>,
    /// Force the greedy solver; otherwise exact whenever it is within limits.
    #[arg(long)]
    pub greedy: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct WeightArgs {
    /// Penalty weights JSON.
    #[arg(long, conflicts_with = "default_weights")]
    pub weights_file: Option<PathBuf>,
    /// Use unit weights.
    #[arg(long)]
    pub default_weights: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct CompileArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub weights: WeightArgs,
    /// Write interaction-graph statistics.
    #[arg(long)]
    pub stats: bool,
    #[arg(long, env = "CCUCP_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct AnnealArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub weights: WeightArgs,
    /// Pre-compiled QUBO text; must match the problem's variable layout.
    #[arg(long, conflicts_with_all = ["weights_file", "default_weights"])]
    pub qubo: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub reads: usize,
    /// Sweeps per read; derived from the model when absent.
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub beta_start: Option<f64>,
    #[arg(long)]
    pub beta_end: Option<f64>,
    #[arg(long, env = "CCUCP_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct TuneArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Tuner configuration JSON; the fast preset when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Starting weights JSON; unit weights when absent.
    #[arg(long)]
    pub initial_weights: Option<PathBuf>,
    /// Reads of a final anneal with the tuned weights (0 skips it).
    #[arg(long, default_value_t = 0)]
    pub final_reads: usize,
    /// Overrides the seed of the configuration file.
    #[arg(long, env = "CCUCP_SEED")]
    pub seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("global pool is configured once");
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
