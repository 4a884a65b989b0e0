use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use implicit_reg::harness::{run_experiment, write_output, Experiment, ExperimentConfig};
use implicit_reg::leave_one_out::Problem;
use implicit_reg::Error;

/// Run the gradient-descent experiments and write CSV results.
///
/// Exit status: 0 when every check passes, 2 when a check fails, 3 on a
/// numeric failure of the harness, 1 on configuration or I/O errors.
#[derive(Parser, Debug)]
#[command(name = "implicit-reg", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML configuration file; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Use the full-size sweep grids.
    #[arg(long, global = true)]
    full_scale: bool,

    /// Restrict to one problem.
    #[arg(long, global = true, value_enum)]
    problem: Option<ProblemArg>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Error-versus-iteration curves for all three problems.
    Convergence,
    /// Matrix completion success rate against the sampling rate.
    PhaseTransition,
    /// Incoherence of the phase retrieval iterates.
    Incoherence,
    /// Noisy matrix completion error against SNR.
    NoiseScaling,
    /// Local curvature checks around the truth.
    Landscape,
    /// Leave-one-out proximity diagnostics.
    Loo,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ProblemArg {
    Pr,
    Mc,
    Bd,
}

fn experiment(cmd: Cmd) -> Experiment {
    match cmd {
        Cmd::Convergence => Experiment::Convergence,
        Cmd::PhaseTransition => Experiment::PhaseTransition,
        Cmd::Incoherence => Experiment::Incoherence,
        Cmd::NoiseScaling => Experiment::NoiseScaling,
        Cmd::Landscape => Experiment::Landscape,
        Cmd::Loo => Experiment::Loo,
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if cli.full_scale {
        cfg = cfg.full_scale();
    }
    if let Some(seed) = cli.seed {
        cfg.run.master_seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.run.workers = w;
    }
    if let Some(out) = &cli.out {
        cfg.run.output_path = out.to_string_lossy().into_owned();
    }
    if let Some(p) = cli.problem {
        cfg.run.problem = Some(match p {
            ProblemArg::Pr => Problem::PhaseRetrieval,
            ProblemArg::Mc => Problem::MatrixCompletion,
            ProblemArg::Bd => Problem::BlindDeconvolution,
        });
    }
    cfg.validate()?;

    let start = Instant::now();
    let out = run_experiment(experiment(cli.command), &cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    for c in &out.checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let written = write_output(&PathBuf::from(&cfg.run.output_path), &cfg, &out, elapsed)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(out.all_passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e @ (Error::NumericFailure { .. } | Error::Diverged { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
