//! Command-line surface: one binary, four subcommands.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "mentor",
    version,
    about = "Train, evaluate, and audit a token-guided gridworld student"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a training experiment and write its artifacts.
    Train(TrainArgs),
    /// Re-evaluate the checkpoints of a finished run on the fixed layouts.
    Evaluate(EvaluateArgs),
    /// Verify recorded traces against the feedback rule.
    Replay(ReplayArgs),
    /// Probe a remote teacher endpoint with one emit/feedback exchange.
    ServeCheck(ServeCheckArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// TOML config file to start from; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Dotted-key override, e.g. --set student.alpha=0.2. Repeatable;
    /// applied after the config file and the shorthand flags.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory for manifest, metrics, checkpoints, and traces.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Shorthand for --set experiment.condition=NAME.
    #[arg(long, value_name = "NAME")]
    pub condition: Option<String>,
    /// Shorthand for --set experiment.episodes=N.
    #[arg(long, value_name = "N")]
    pub episodes: Option<u64>,
    /// Shorthand for --set experiment.seeds=LIST (comma separated).
    #[arg(long, value_name = "LIST")]
    pub seeds: Option<String>,
    /// Teacher wiring: oracle, tabular, or remote:HOST:PORT.
    #[arg(long, value_name = "KIND")]
    pub teacher: Option<String>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Directory holding manifest.json and checkpoints from a train run.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    /// Trace files (trace_seed*.jsonl) to verify.
    #[arg(value_name = "TRACE", required = true)]
    pub traces: Vec<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeCheckArgs {
    /// Remote teacher address, HOST:PORT.
    #[arg(long, value_name = "ADDR")]
    pub addr: String,
    /// Probe timeout in milliseconds.
    #[arg(long, value_name = "MS", default_value_t = 5000)]
    pub timeout_ms: u64,
}
