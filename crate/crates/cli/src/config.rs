use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use tgbs::exec::{available_workers, DEFAULT_CHUNK};
use tgbs::oracle::DEFAULT_ENUMERATION_LIMIT;
use tgbs::{Parallelism, PrecisionMode, StepConfig};

use crate::output::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "tgbs",
    version,
    about = "Exact sampling of threshold-detector Gaussian boson sampling",
    after_help = crate::AFTER_HELP
)]
pub struct Cli {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Worker threads for parallel sections [default: available cores]
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Branches or draws per work chunk. Fixes the reduction tree, so equal
    /// --workers and --chunk give bit-identical output on any machine
    #[arg(long, global = true, default_value_t = DEFAULT_CHUNK)]
    pub chunk: usize,

    /// Accumulator for probability sums: compensated (Neumaier) or double-double
    #[arg(long, global = true, default_value = "compensated")]
    pub precision: PrecisionMode,

    /// Write 0 in every wall-clock field so output is byte-reproducible
    #[arg(long, global = true)]
    pub no_timing: bool,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Squeezed vacuum through a Haar-random interferometer, then exact
    /// threshold samples (optionally postselected or fully forced)
    Sample(SampleArgs),
    /// Check the sequential chain against inclusion-exclusion on every
    /// click pattern of random small instances
    OracleCheck(OracleArgs),
    /// Worst-case memory, node count and runtime extrapolation for a
    /// given number of modes and clicks
    Estimate(EstimateArgs),
    /// Random search for a dense k-vertex subgraph, with uniform or GBS
    /// proposals
    Densest(DensestArgs),
    /// Wall time of forced click patterns as a function of click count
    Bench(BenchArgs),
    /// Re-run the configuration embedded in a CSV written by this tool
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    /// Number of modes
    #[arg(long)]
    pub modes: usize,

    /// Squeezing of every input mode, dB
    #[arg(long, default_value_t = 8.0)]
    pub squeezing_db: f64,

    /// Uniform loss after the interferometer, dB
    #[arg(long, default_value_t = 0.0)]
    pub loss_db: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Rows to write; with --clicks, accepted draws
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,

    /// Postselect on exactly this many clicks. Draws are abandoned as soon
    /// as the target becomes unreachable
    #[arg(long)]
    pub clicks: Option<usize>,

    /// Raw draws allowed while postselecting
    #[arg(long, default_value_t = 10_000_000)]
    pub max_draws: u64,

    /// Force every outcome (bit string, mode 0 first) and print the joint
    /// probability of the pattern
    #[arg(long, conflicts_with = "clicks")]
    pub forced: Option<String>,

    /// Measurement order, comma-separated [default: modes-1, ..., 0]
    #[arg(long, value_delimiter = ',')]
    pub order: Option<Vec<usize>>,

    /// Sample CSV [default: stdout]
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,

    /// JSON run summary [default: stderr]
    #[arg(long)]
    #[serde(skip)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OracleArgs {
    /// Number of modes (at most 10)
    #[arg(long, default_value_t = 6)]
    pub modes: usize,

    /// Random instances to check
    #[arg(long, default_value_t = 20)]
    pub trials: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Upper end of the per-mode squeezing, drawn uniformly from [0, max], dB
    #[arg(long, default_value_t = 8.0)]
    pub squeezing_db: f64,

    /// Uniform loss applied to every instance, dB
    #[arg(long, default_value_t = 0.0)]
    pub loss_db: f64,

    /// Check the vacuum instead of random states
    #[arg(long)]
    pub vacuum: bool,

    /// Per-pattern CSV [default: stdout]
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    /// Number of modes
    #[arg(long)]
    pub modes: usize,

    /// Clicks, all placed on the first measured modes (the worst case)
    #[arg(long)]
    pub clicks: usize,

    /// Overhead factor η on the raw covariance storage, for temporaries
    #[arg(long, default_value_t = 2.0)]
    pub eta: f64,

    /// Bytes per stored scalar (16 = complex double)
    #[arg(long, default_value_t = 16)]
    pub bytes_per_scalar: u32,

    /// Memory per node μ, GiB (32 = one Titan node)
    #[arg(long, default_value_t = 32.0)]
    pub node_gb: f64,

    /// Cores per node, used for the walltime estimate
    #[arg(long, default_value_t = 16)]
    pub node_cores: u32,

    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Output file [default: stdout]
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Uniform,
    Gbs,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::Gbs => "gbs",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DensestArgs {
    /// DIMACS .clq file, or planted:<seed> for a generated 30-vertex
    /// instance with a dense 10-vertex block
    #[arg(long)]
    pub graph: String,

    /// Subgraph size
    #[arg(long, default_value_t = 10)]
    pub k: usize,

    #[arg(long, value_enum, default_value_t = Strategy::Gbs)]
    pub strategy: Strategy,

    /// Uniform loss on the encoded state, dB (gbs only)
    #[arg(long, default_value_t = 0.0)]
    pub loss_db: f64,

    /// Mean photon number of the encoded state [default: k]
    #[arg(long)]
    pub mean_photons: Option<f64>,

    /// Proposals per run
    #[arg(long, default_value_t = 1000)]
    pub budget: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Independent runs; more than one writes the averaged trace
    #[arg(long, default_value_t = 1)]
    pub runs: usize,

    /// Raw GBS draws allowed per run while postselecting on k clicks
    #[arg(long, default_value_t = 10_000_000)]
    pub max_draws: u64,

    /// Trace CSV [default: stdout]
    #[arg(long)]
    #[serde(skip)]
    pub trace_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Clicks on the first measured modes (largest branch matrices)
    Front,
    /// Clicks on a random subset of modes
    Random,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    /// Number of modes
    #[arg(long, default_value_t = 16)]
    pub modes: usize,

    /// Click counts to sweep: comma-separated values or a-b ranges
    #[arg(long, default_value = "0-8")]
    pub clicks: String,

    /// Repetitions per click count
    #[arg(long, default_value_t = 5)]
    pub reps: usize,

    /// Squeezing of every input mode, dB
    #[arg(long, default_value_t = 8.0)]
    pub squeezing_db: f64,

    #[arg(long, value_enum, default_value_t = Placement::Random)]
    pub placement: Placement,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Timing CSV [default: stdout]
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// CSV file whose first line is a `# {json}` configuration header
    pub file: PathBuf,

    /// Where to write the regenerated file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Everything that determines a run's output. Output paths are not part of
/// the serialized form, so two runs writing to different files still
/// produce identical bytes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub tool: String,
    pub version: String,
    pub workers: usize,
    pub chunk: usize,
    pub precision: PrecisionMode,
    pub timing: bool,
    pub command: Command,
}

impl RunConfig {
    pub fn resolve(run: &RunArgs, command: Command) -> Self {
        Self {
            tool: "tgbs".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            workers: run.workers.unwrap_or_else(available_workers),
            chunk: run.chunk,
            precision: run.precision,
            timing: !run.no_timing,
            command,
        }
    }

    pub fn parallelism(&self) -> Parallelism {
        Parallelism {
            workers: self.workers,
            chunk_size: self.chunk,
        }
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            precision: self.precision,
            parallelism: self.parallelism(),
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if self.workers == 0 {
            return invalid("--workers must be at least 1");
        }
        if self.chunk == 0 {
            return invalid("--chunk must be at least 1");
        }
        match &self.command {
            Command::Sample(a) => {
                require_modes(a.modes)?;
                non_negative_db("--squeezing-db", a.squeezing_db)?;
                non_negative_db("--loss-db", a.loss_db)?;
                if a.clicks.is_some_and(|c| c > a.modes) {
                    return invalid(format!("--clicks exceeds --modes {}", a.modes));
                }
                if let Some(f) = &a.forced {
                    if f.len() != a.modes {
                        return invalid(format!("--forced has {} bits for {} modes", f.len(), a.modes));
                    }
                }
                if let Some(o) = &a.order {
                    if o.len() != a.modes {
                        return invalid(format!("--order lists {} modes, expected {}", o.len(), a.modes));
                    }
                }
            }
            Command::OracleCheck(a) => {
                require_modes(a.modes)?;
                if a.modes > DEFAULT_ENUMERATION_LIMIT {
                    return invalid(format!(
                        "oracle check refused for {} modes (limit {DEFAULT_ENUMERATION_LIMIT})",
                        a.modes
                    ));
                }
                non_negative_db("--squeezing-db", a.squeezing_db)?;
                non_negative_db("--loss-db", a.loss_db)?;
            }
            Command::Estimate(a) => {
                require_modes(a.modes)?;
                if a.clicks > a.modes {
                    return invalid(format!("--clicks {} exceeds --modes {}", a.clicks, a.modes));
                }
            }
            Command::Densest(a) => {
                non_negative_db("--loss-db", a.loss_db)?;
                if a.k == 0 || a.budget == 0 || a.runs == 0 {
                    return invalid("--k, --budget and --runs must be at least 1");
                }
                if a.mean_photons.is_some_and(|m| !(m > 0.0 && m.is_finite())) {
                    return invalid("--mean-photons must be positive");
                }
            }
            Command::Bench(a) => {
                require_modes(a.modes)?;
                non_negative_db("--squeezing-db", a.squeezing_db)?;
                if a.reps == 0 {
                    return invalid("--reps must be at least 1");
                }
            }
            Command::Replay(_) => return invalid("replay configurations cannot nest"),
        }
        Ok(())
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Validation(msg.into()))
}

fn require_modes(modes: usize) -> Result<(), Failure> {
    if modes == 0 {
        return invalid("--modes must be at least 1");
    }
    Ok(())
}

fn non_negative_db(flag: &str, db: f64) -> Result<(), Failure> {
    if !(db >= 0.0 && db.is_finite()) {
        return invalid(format!("{flag} must be a non-negative number of dB, got {db}"));
    }
    Ok(())
}

/// Reads the header of `args.file` and points the primary output at
/// `args.out`; secondary outputs (the sample summary) are dropped.
pub fn load_replay(args: &ReplayArgs) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(&args.file)
        .map_err(|e| Failure::Io(format!("{}: {e}", args.file.display())))?;
    let header = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| Failure::Validation(format!("{}: no configuration header", args.file.display())))?;
    let mut config: RunConfig = serde_json::from_str(header)
        .map_err(|e| Failure::Validation(format!("{}: bad configuration header: {e}", args.file.display())))?;
    let out = args.out.clone();
    match &mut config.command {
        Command::Sample(a) => a.out = out,
        Command::OracleCheck(a) => a.out = out,
        Command::Estimate(a) => a.out = out,
        Command::Densest(a) => a.trace_out = out,
        Command::Bench(a) => a.out = out,
        Command::Replay(_) => return invalid("replay configurations cannot nest"),
    }
    Ok(config)
}
