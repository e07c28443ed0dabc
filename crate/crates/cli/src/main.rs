use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use coclab_cli::config::ExperimentMode;
use coclab_cli::runner::{PerturbArgs, EXIT_ERROR};
use coclab_cli::{parse_config, run, Command, OutputPlan};

#[derive(Parser)]
#[command(name = "coclab", version, about = "Lyapunov exponents and hyperbolicity of SL(2,R) cocycles over torus maps")]
struct Cli {
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (for `perturb`, a `.jsonl` path names the results file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Raise,
    Lower,
    Probe,
}

#[derive(Subcommand)]
enum Sub {
    /// Integrated top exponent over the configured measure.
    Estimate,
    /// Spectrum verdict as one JSON line.
    Classify,
    /// Parameter scan table.
    Scan,
    /// Perturbation experiment.
    Perturb {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Conjugacy between the linear part and the perturbed base.
    Conjugacy,
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("COCLAB_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("COCLAB_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            anyhow::bail!("COCLAB_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main_inner(cli: Cli) -> Result<i32> {
    init_threads()?;
    let path = cli.config.context("--config <file> is required")?;
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    let cmd = match cli.command {
        Sub::Estimate => Command::Estimate,
        Sub::Classify => Command::Classify,
        Sub::Scan => Command::Scan,
        Sub::Conjugacy => Command::Conjugacy,
        Sub::Perturb { mode, epsilon, trials } => Command::Perturb(PerturbArgs {
            mode: mode.map(|m| match m {
                Mode::Raise => ExperimentMode::Raise,
                Mode::Lower => ExperimentMode::Lower,
                Mode::Probe => ExperimentMode::Probe,
            }),
            epsilon,
            trials,
        }),
    };
    let plan = OutputPlan::from_flag(cli.out.as_deref(), &cfg);
    let config_dir = path.parent().map(PathBuf::from).unwrap_or_default();
    let outcome = run(&cfg, &cmd, &plan, &config_dir)?;
    println!("{}", outcome.summary);
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
