use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use torus_mhd::runner::{parse_override, run_experiment, ExitStatus, Experiment, ExperimentConfig, PRESETS};

/// Simulation and verification experiments for damped MHD on the torus.
///
/// Exit codes: 0 success, 1 other failure, 2 invalid configuration,
/// 3 blow-up abort, 4 I/O error.
#[derive(Parser)]
#[command(name = "torus-mhd", version)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "TORUS_MHD_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact linear evolution, energy identity and decay-rate fits.
    LinearDecay(RunArgs),
    /// Full nonlinear run with observables, fits and a final checkpoint.
    Nonlinear(RunArgs),
    /// Empirical constants of the Duhamel kernel bounds.
    KernelSweep(RunArgs),
    /// Diophantine constant and nearest resonances of the background field.
    DiophantineEstimate(RunArgs),
    /// List built-in presets.
    Presets,
}

/// Settings are resolved as preset, then config file, then `--set` and the
/// dedicated flags.
#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Base preset (default `2d-default`).
    #[arg(long, short)]
    preset: Option<String>,

    /// Override one key, e.g. `--set N=32`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[arg(long, short)]
    output_dir: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(experiment: Experiment, args: &RunArgs) -> torus_mhd::Result<ExperimentConfig> {
    let mut overrides = args
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<torus_mhd::Result<Vec<_>>>()?;
    overrides.push(("experiment".into(), experiment.name().into()));
    if let Some(dir) = &args.output_dir {
        overrides.push(("output_dir".into(), dir.display().to_string()));
    }
    if let Some(seed) = args.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    match &args.config {
        Some(path) => ExperimentConfig::from_file(path, args.preset.as_deref(), &overrides),
        None => ExperimentConfig::resolve(args.preset.as_deref(), None, &overrides),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(ExitStatus::Failure.code() as u8);
        }
    }
    let (experiment, args) = match &cli.command {
        Command::LinearDecay(a) => (Experiment::LinearDecay, a),
        Command::Nonlinear(a) => (Experiment::Nonlinear, a),
        Command::KernelSweep(a) => (Experiment::KernelSweep, a),
        Command::DiophantineEstimate(a) => (Experiment::DiophantineEstimate, a),
        Command::Presets => {
            for name in PRESETS {
                println!("{name}");
            }
            return ExitCode::SUCCESS;
        }
    };
    let cfg = match resolve(experiment, args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(ExitStatus::of_error(&e).code() as u8);
        }
    };
    if args.print_config {
        print!("{}", cfg.to_file_string());
        return ExitCode::SUCCESS;
    }
    ExitCode::from(run_experiment(&cfg).code() as u8)
}
