//! `qpt`: batch front end for tensor-network process tomography.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use output::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "qpt",
    version,
    about = "Tensor-network quantum process tomography"
)]
struct Cli {
    /// Worker threads for record evaluation and sampling (results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Print the summary as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample single-shot records from a channel spec.
    Simulate(SimulateArgs),
    /// Train an LPDO on a dataset.
    Reconstruct(ReconstructArgs),
    /// Fidelity between a checkpoint and a reference channel.
    Fidelity(FidelityArgs),
    /// Dense Choi matrix of a checkpoint restricted to a qubit subset.
    Reduce(ReduceArgs),
    /// Contraction plan of the probability network.
    Plan(PlanArgs),
    /// Compare analytic and finite-difference gradients on a random model.
    Gradcheck(GradcheckArgs),
    /// Best-epoch infidelity for several training-set sizes.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Channel spec JSON.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Number of shots.
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for dataset.txt and manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Depolarizing strength applied to prepared states.
    #[arg(long)]
    state_depolarizing: Option<f64>,
    /// Probability of flipping each measured sign.
    #[arg(long)]
    readout_flip: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset file.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Builtin name (line<N>, ring<N>, tee4, ibeam7) or topology JSON file.
    #[arg(long)]
    topology: Option<String>,
    #[arg(long)]
    bond_dim: Option<usize>,
    #[arg(long)]
    kraus_dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Adam step size.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-qubit state/POVM replacement file.
    #[arg(long)]
    spam_override: Option<PathBuf>,
    /// Channel spec whose ideal channel is tracked by fidelity.
    #[arg(long)]
    reference_spec: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Training-set sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
pub struct FidelityArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Channel spec JSON or dense Choi JSON.
    #[arg(long)]
    reference: PathBuf,
    /// Materialize both channels even for a unitary reference.
    #[arg(long)]
    dense: bool,
}

#[derive(Args, Debug)]
pub struct ReduceArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Qubits to keep, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    keep: Vec<usize>,
    /// Fixed input `qubit=label` with a Pauli-6 label such as Z+ (repeatable).
    #[arg(long = "fix")]
    fixed: Vec<String>,
    /// Label for every qubit neither kept nor fixed.
    #[arg(long)]
    fix_others: Option<String>,
    /// Output dense Choi JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    #[arg(long)]
    topology: String,
    #[arg(long, default_value_t = 2)]
    bond_dim: usize,
    #[arg(long, default_value_t = 2)]
    kraus_dim: usize,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value = "line2")]
    topology: String,
    #[arg(long, default_value_t = 2)]
    bond_dim: usize,
    #[arg(long, default_value_t = 2)]
    kraus_dim: usize,
    /// Random records in the batch.
    #[arg(long, default_value_t = 8)]
    records: usize,
    #[arg(long, default_value_t = 0.1)]
    kappa: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale of the random perturbation around the identity channel.
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }

    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Reconstruct(a) => commands::reconstruct(a),
        Command::Fidelity(a) => commands::fidelity(a),
        Command::Reduce(a) => commands::reduce(a),
        Command::Plan(a) => commands::plan(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(summary) => {
            output::print_summary(&summary, cli.json);
            if summary.failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
