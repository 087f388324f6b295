use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qfl_core::checks::{default_grad, equivalence_battery, gradcheck_battery};
use qfl_core::data::DATA_DIR_ENV;
use qfl_core::experiment::{run_experiment, tabulate};
use qfl_core::learning::EvalMode;
use qfl_core::{Error, FederationConfig};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "qfl",
    version,
    about = "Depth-heterogeneous quantum federated learning on a statevector simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every seed of a configuration, writing CSV and summary artifacts.
    Run(RunArgs),
    /// Compare reverse-mode gradients with parameter shift and finite differences.
    Gradcheck(GradcheckArgs),
    /// Check ancilla/mid-circuit equivalence, funnel locality and layerwise truncation.
    VerifyEquivalence(EquivalenceArgs),
    /// Merge run summaries into one capacity by technique table.
    Tabulate {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Print the default configuration.
    DefaultConfig,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = DATA_DIR_ENV, default_value = "data")]
    data_dir: PathBuf,
    /// Output directory, overriding `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds, overriding `seeds`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    rounds: Option<usize>,
    /// `analytic` or `shots=K`.
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 6)]
    qubits: usize,
    #[arg(long, default_value_t = 5)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EquivalenceArgs {
    #[arg(long, default_value_t = 6)]
    qubits: usize,
    #[arg(long, default_value_t = 20)]
    cases: usize,
    #[arg(long, default_value_t = 100_000)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Check,
    Config(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e)
    }
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut config = match &args.config {
        Some(path) => FederationConfig::from_file(path)?,
        None => FederationConfig::default(),
    };
    if let Some(seeds) = args.seeds {
        config.seeds = seeds;
    }
    if let Some(rounds) = args.rounds {
        config.rounds = rounds;
    }
    if let Some(mode) = args.mode {
        config.eval_mode = mode.parse::<EvalMode>()?;
    }
    if let Some(out) = args.out {
        config.out_dir = out;
    }
    config.validate()?;
    let summary = run_experiment(&config, &args.data_dir, &config.out_dir)?;
    print!("{}", summary.render());
    Ok(())
}

fn gradcheck(args: GradcheckArgs) -> Result<(), Failure> {
    let cells = gradcheck_battery(args.qubits, 2..=6, args.draws, args.seed, &default_grad)?;
    let mut failed = 0;
    for cell in &cells {
        println!("{}", cell.report_line());
        failed += usize::from(!cell.passed());
    }
    println!("{} cells, {failed} failed", cells.len());
    if failed > 0 {
        return Err(Failure::Check);
    }
    Ok(())
}

fn verify_equivalence(args: EquivalenceArgs) -> Result<(), Failure> {
    let lines = equivalence_battery(args.qubits, args.cases, args.shots, args.seed)?;
    let mut failed = 0;
    for line in &lines {
        println!("{}", line.report_line());
        failed += usize::from(!line.passed());
    }
    println!("{} checks, {failed} failed", lines.len());
    if failed > 0 {
        return Err(Failure::Check);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::VerifyEquivalence(a) => verify_equivalence(a),
        Command::Tabulate { runs } => tabulate(&runs)
            .map(|t| print!("{t}"))
            .map_err(Failure::from),
        Command::DefaultConfig => {
            print!("{}", FederationConfig::default().to_toml_string());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
