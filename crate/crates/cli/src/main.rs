mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use error::{Category, CliError};

static QUIET: AtomicBool = AtomicBool::new(false);

/// Progress line on stderr.
pub fn progress(msg: impl AsRef<str>) {
    if !QUIET.load(Ordering::Relaxed) {
        eprintln!("{}", msg.as_ref());
    }
}

#[derive(Parser)]
#[command(name = "mmof", version, about = "Offline RL benchmark on a MOBA micro-environment")]
struct Cli {
    /// Worker threads for episode-parallel work [default: available parallelism]
    #[arg(long, global = true, env = "MMOF_WORKERS")]
    workers: Option<usize>,
    /// Silence progress output on stderr
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a dataset from a recipe, or the whole standard suite
    Sample(SampleArgs),
    /// Train an offline algorithm on a dataset
    Train(TrainArgs),
    /// Evaluate a checkpoint or scripted level against the ladder
    Eval(EvalArgs),
    /// Pairwise win-rate matrix of the scripted levels
    Ladder(LadderArgs),
    /// Inspect, validate and mix datasets
    Dataset {
        #[command(subcommand)]
        cmd: DatasetCmd,
    },
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SampleArgs {
    /// JSON file with any of these options; flags override it
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Recipe JSON file
    #[arg(long)]
    pub recipe: Option<PathBuf>,
    /// Output .mmof file, or output directory with --suite
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Generate the standard dataset suite instead of one recipe
    #[arg(long)]
    #[serde(default)]
    pub suite: bool,
    /// Override the recipe name
    #[arg(long)]
    pub name: Option<String>,
    /// Override the recipe episode count
    #[arg(long)]
    pub episodes: Option<u32>,
    /// Override the recipe base seed (suite seed with --suite)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Suite: episodes per main dataset [default: 512]
    #[arg(long)]
    pub main_episodes: Option<u32>,
    /// Suite: episodes per sub-task dataset [default: 64]
    #[arg(long)]
    pub subtask_episodes: Option<u32>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TrainArgs {
    /// JSON file with any of these options plus a `hyperparameters` object
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Algorithm: bc, cql, qmix_cql, iql, td3_bc, ind_bc, ind_cql, ind_qmix_cql, comm_cql, ind_icq, maicq, omar
    #[arg(long)]
    pub algo: Option<String>,
    /// Training dataset (.mmof)
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output directory for model.ckpt, losses.csv and manifest.json
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for initialization and minibatch sampling
    #[arg(long)]
    pub seed: Option<u64>,
    /// Gradient steps
    #[arg(long)]
    pub steps: Option<u64>,
    /// Transitions per minibatch
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam learning rate
    #[arg(long)]
    pub lr: Option<f32>,
    /// Hidden layer width
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Log losses every this many steps
    #[arg(long)]
    pub log_every: Option<u64>,
    /// Any hyperparameter as key=value, e.g. --set cql_alpha=5 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    #[serde(default)]
    pub set: Vec<String>,
    #[arg(skip)]
    #[serde(default)]
    pub hyperparameters: serde_json::Map<String, serde_json::Value>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EvalArgs {
    /// JSON file with any of these options; flags override it
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Checkpoint to evaluate
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Evaluate scripted level instead of a checkpoint
    #[arg(long)]
    pub level: Option<u8>,
    /// Mode (solo, trio, sub_destroy_turret, sub_gain_gold) [default: the checkpoint's]
    #[arg(long)]
    pub mode: Option<String>,
    /// Opponent ladder level (not used in sub-tasks)
    #[arg(long)]
    pub opponent: Option<u8>,
    /// Evaluation episodes [default: 150]
    #[arg(long)]
    pub episodes: Option<u32>,
    /// Base episode seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample actions from the policy instead of acting greedily
    #[arg(long)]
    #[serde(default)]
    pub stochastic: bool,
    /// Benchmark manifest: evaluate every run and aggregate over seeds
    #[arg(long)]
    pub benchmark: Option<PathBuf>,
    /// Report file (JSON), or output directory with --benchmark
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LadderArgs {
    /// JSON file with any of these options; flags override it
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// solo or trio [default: solo]
    #[arg(long)]
    pub mode: Option<String>,
    /// Episodes per level pair [default: 300]
    #[arg(long)]
    pub episodes: Option<u32>,
    /// Base seed [default: the golden ladder seed]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for ladder.csv, ladder.json and manifest.json
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Return and win-rate statistics
    Stats(StatsArgs),
    /// Check every stored action against its masks and the episode invariants
    Validate(ValidateArgs),
    /// Equal-share mixture of datasets
    Mix(MixArgs),
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct StatsArgs {
    /// JSON file with any of these options; flags override it
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Dataset (.mmof)
    pub path: Option<PathBuf>,
    /// Write the statistics here (.csv for CSV, JSON otherwise)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ValidateArgs {
    /// JSON file with any of these options; flags override it
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Dataset (.mmof)
    pub path: Option<PathBuf>,
    /// Write the validation report (JSON) here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MixArgs {
    /// JSON file with any of these options; flags override it
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Input datasets
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    /// Output .mmof file
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Shuffle seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    QUIET.store(cli.quiet, Ordering::Relaxed);
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::config("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::new(Category::Runtime, e.to_string()))?;
    }
    match cli.cmd {
        Cmd::Sample(a) => commands::sample(a),
        Cmd::Train(a) => commands::train(a),
        Cmd::Eval(a) => commands::eval(a),
        Cmd::Ladder(a) => commands::ladder(a),
        Cmd::Dataset { cmd } => match cmd {
            DatasetCmd::Stats(a) => commands::stats(a),
            DatasetCmd::Validate(a) => commands::validate(a),
            DatasetCmd::Mix(a) => commands::mix(a),
        },
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                std::process::exit(0);
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                let _ = e.print();
            }
            let text = e.kind().to_string();
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or(&text).trim_start_matches("error: ");
            eprintln!("{}", CliError::new(Category::Usage, first).line());
            std::process::exit(Category::Usage.code());
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("{}", e.line());
        std::process::exit(e.category.code());
    }
}
