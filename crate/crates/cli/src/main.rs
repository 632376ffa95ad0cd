use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ptproc_cli::batteries::list_batteries;
use ptproc_cli::config::{ExperimentConfig, ExperimentKind, Overrides};
use ptproc_cli::{run, CliError};

#[derive(Parser)]
#[command(name = "ptproc", version, about = "Simulate and cross-check interacting counting processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample paths and record states on the time grid
    Simulate(RunArgs),
    /// Exact probability tables
    Pmf(RunArgs),
    /// Exact moments beside Monte Carlo estimates
    Moments(RunArgs),
    /// Run an engine-versus-oracle battery; exits 1 on a tolerance breach
    Validate(RunArgs),
    /// Endpoints of a process run on an inverse subordinator clock
    Timechange(RunArgs),
    /// Print the battery catalog with config templates as JSON
    Batteries,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn execute(kind: ExperimentKind, args: RunArgs) -> Result<u8, CliError> {
    let overrides = Overrides { seed: args.seed, replicates: args.replicates, out: args.out };
    let cfg = ExperimentConfig::load(&args.config)?.resolve(kind, &overrides)?;
    let report = run(&cfg)?;
    for c in &report.checks {
        let verdict = if c.passed() { "ok" } else { "FAILED" };
        println!("{verdict:>6}  {}: {:e} (tolerance {:e})", c.name, c.value, c.tolerance);
    }
    println!("wrote {} rows to {}", report.rows, report.out_dir.display());
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (kind, args) = match cli.command {
        Command::Batteries => {
            let catalog = serde_json::to_string_pretty(&list_batteries()).expect("catalog serializes");
            println!("{catalog}");
            return ExitCode::SUCCESS;
        }
        Command::Simulate(a) => (ExperimentKind::Simulate, a),
        Command::Pmf(a) => (ExperimentKind::Pmf, a),
        Command::Moments(a) => (ExperimentKind::Moments, a),
        Command::Validate(a) => (ExperimentKind::Validate, a),
        Command::Timechange(a) => (ExperimentKind::Timechange, a),
    };
    match execute(kind, args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
