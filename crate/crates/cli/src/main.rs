mod commands;
mod io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Queueing-model resource planning for operator networks: predict expected
/// tuple sojourn times, place processors optimally, validate against a
/// built-in discrete-event simulator, and drive a closed re-balancing loop.
#[derive(Debug, Parser)]
#[command(name = "sojourn", version, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Predict per-operator and total expected sojourn for an allocation.
    Predict(PredictArgs),
    /// Minimize expected sojourn under a processor budget.
    Plan(PlanArgs),
    /// Find the fewest processors meeting a sojourn target.
    Provision(ProvisionArgs),
    /// Run the discrete-event simulator and compare against the model.
    Simulate(SimulateArgs),
    /// Simulate several allocations under a common arrival sequence.
    Sweep(SweepArgs),
    /// Run the closed measure-smooth-plan-rebalance loop in simulation.
    Loop(LoopArgs),
    /// Replay a metric log through aggregation, smoothing and planning.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Topology JSON file.
    #[arg(long)]
    topology: PathBuf,
    /// Processor counts per operator, `k1:k2:...:kN`.
    #[arg(long)]
    allocation: String,
    /// Measured rates JSON overriding the traffic equations.
    #[arg(long)]
    rates: Option<PathBuf>,
    /// Directory for the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    rates: Option<PathBuf>,
    /// Processor budget.
    #[arg(long)]
    kmax: u32,
    /// Cross-check the greedy result against exhaustive enumeration.
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProvisionArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    rates: Option<PathBuf>,
    /// Sojourn target in milliseconds.
    #[arg(long)]
    tmax_ms: f64,
    /// Safety bound on the processor count.
    #[arg(long)]
    kcap: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Simulation config JSON (topology embedded).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated allocations, e.g. `10:11:1,8:12:2`.
    #[arg(long)]
    allocations: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LoopArgs {
    #[arg(long)]
    topology: PathBuf,
    /// Controller config JSON.
    #[arg(long)]
    control: PathBuf,
    /// Loop scenario JSON (initial allocation, intervals, perturbation).
    #[arg(long)]
    sim: PathBuf,
    /// Override the scenario smoothing: `alpha=<a>` or `window=<w>`.
    #[arg(long)]
    smooth: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// Newline-delimited metric log.
    #[arg(long)]
    log: PathBuf,
    /// Plan with a processor budget.
    #[arg(long, conflicts_with = "tmax_ms")]
    kmax: Option<u32>,
    /// Plan against a sojourn target in milliseconds.
    #[arg(long)]
    tmax_ms: Option<f64>,
    /// Smoothing scheme, `alpha=<a>` or `window=<w>`.
    #[arg(long, default_value = "alpha=0.5")]
    smooth: String,
    /// Arrival-sampling stride the log was recorded with.
    #[arg(long, default_value_t = 1)]
    nm: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not errors.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match &cli.command {
        Command::Predict(args) => commands::predict(args),
        Command::Plan(args) => commands::plan(args),
        Command::Provision(args) => commands::provision(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::Loop(args) => commands::run_loop(args),
        Command::Replay(args) => commands::replay(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
