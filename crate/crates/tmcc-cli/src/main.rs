use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use tmcc_cli::config::{default_config, RunConfig};
use tmcc_cli::{commands, CliError};

#[derive(Parser)]
#[command(name = "tmcc", about = "Calibrated matrix completion benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Run configuration (TOML). A small built-in scenario is used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Scenario seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trial-level parallelism for bench; does not change any result.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Comma-separated subset of TMCC,MC0,CMC_SI,TS.
    #[arg(long, global = true)]
    methods: Option<String>,
    /// Trial count override.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Observation noise standard deviation override.
    #[arg(long = "noise-sd", global = true)]
    noise_sd: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Materialize a synthetic scenario as matrix files.
    Generate,
    /// Run the selected methods on a generated dataset directory.
    Fit,
    /// End-to-end: generate trials, tune, run every method, summarize.
    Bench,
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => default_config(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    if let Some(noise_sd) = cli.noise_sd {
        cfg.scenario.noise_sd = noise_sd;
    }
    if let Some(methods) = &cli.methods {
        cfg.methods = methods
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
    }
    cfg.parsed_methods()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = build_config(cli)?;
    match cli.command {
        Cmd::Generate => {
            for path in commands::cmd_generate(&cfg)? {
                println!("wrote {}", path.display());
            }
        }
        Cmd::Fit => commands::cmd_fit(&cfg)?,
        Cmd::Bench => commands::cmd_bench(&cfg, cli.workers)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
