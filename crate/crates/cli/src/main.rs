//! `deploygame` command line: scenario reports, equilibrium sweeps,
//! adoption dynamics, the coordination mechanism, and config validation.
//!
//! Exit codes: 0 success, 1 validation failure, 2 dataset missing,
//! 3 computation cap exceeded.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use deploygame_cli::experiments::{
    run_alpha_sweep, run_flatten_sweep, run_induction, run_logit, run_mechanism, run_price_sweep,
    run_report, RunContext,
};
use deploygame_cli::scenario::Scenario;
use deploygame_cli::validate::{validate_config, Severity};

#[derive(Parser)]
#[command(
    name = "deploygame",
    version,
    about = "Economics of deploying a new network architecture across ISPs"
)]
struct Cli {
    /// Scenario configuration file (TOML).
    #[arg(long, global = true, default_value = "scenario.toml")]
    config: PathBuf,
    /// Override the experiment seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Maximum worker threads for sweeps and replicas.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deployability analytics (γ, benefits, deployment price, thresholds).
    Report,
    /// Equilibrium scale against the unit price.
    SweepPrice,
    /// Equilibrium scale against price for each incremental exponent.
    SweepAlpha,
    /// Equilibrium scale against price for each flattening bound.
    SweepFlatten,
    /// Averaged logit-response adoption trajectories.
    Logit,
    /// Iterated-dominance threshold brackets.
    Induction,
    /// Multi-round tipping-set coordination trace.
    Mechanism,
    /// Check the scenario configuration and data invariants.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = RunContext {
        config_path: cli.config.clone(),
        out_dir: cli.out.clone(),
        seed_override: cli.seed,
        jobs: cli.jobs,
    };
    match cli.command {
        Command::Validate => {
            let (diagnostics, _) = validate_config(&cli.config);
            match serde_json::to_string_pretty(&diagnostics) {
                Ok(json) => println!("{json}"),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            }
            let failed = diagnostics.iter().any(|d| d.severity == Severity::Error);
            if failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        command => {
            let scenario = match Scenario::load(&cli.config) {
                Ok(s) => s,
                Err(e) if e.is_dataset_missing() => {
                    eprintln!("dataset missing, skipping: {e}");
                    return ExitCode::from(2);
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let result = match command {
                Command::Report => run_report(&scenario, &ctx),
                Command::SweepPrice => run_price_sweep(&scenario, &ctx),
                Command::SweepAlpha => run_alpha_sweep(&scenario, &ctx),
                Command::SweepFlatten => run_flatten_sweep(&scenario, &ctx),
                Command::Logit => run_logit(&scenario, &ctx),
                Command::Induction => run_induction(&scenario, &ctx),
                Command::Mechanism => run_mechanism(&scenario, &ctx),
                Command::Validate => unreachable!("handled above"),
            };
            match result {
                Ok(path) => {
                    println!("wrote {}", path.display());
                    ExitCode::SUCCESS
                }
                Err(e) if e.is_dataset_missing() => {
                    eprintln!("dataset missing, skipping: {e}");
                    ExitCode::from(2)
                }
                Err(e) if e.is_cap_exceeded() => {
                    eprintln!("cap exceeded: {e}");
                    ExitCode::from(3)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
