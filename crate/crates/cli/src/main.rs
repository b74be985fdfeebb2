use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use pricelab::harness::{report, run_trials, RunConfig, RunSummary};

#[derive(Parser)]
#[command(name = "pricelab", version, about = "Contextual dynamic pricing regret simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Recompute aggregates and diagnostics from the CSVs of a finished run.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

fn print_table(summary: &RunSummary) {
    println!(
        "{:<15} {:>6} {:>7} {:>14} {:>11} {:>10} {:>8} {:>9} {:>8} {:>8}",
        "policy", "trials", "T", "Reg(T)", "se", "AveReg", "slope", "benchmark", "fallback", "clamped"
    );
    for p in &summary.policies {
        let slope = p.slope.map_or_else(|| "-".to_string(), |s| format!("{s:.4}"));
        println!(
            "{:<15} {:>6} {:>7} {:>14.4} {:>11.4} {:>10.5} {:>8} {:>9.4} {:>8} {:>8}",
            p.policy.as_str(),
            p.trials,
            p.horizon,
            p.final_regret_mean,
            p.final_regret_se,
            p.ave_regret,
            slope,
            p.benchmark_slope,
            p.inversions.fallback,
            p.inversions.clamped,
        );
    }
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run { config } => {
            let cfg = RunConfig::from_path(&config).with_context(|| format!("loading {}", config.display()))?;
            let out = run_trials(&cfg)?;
            print_table(&out.summary);
            println!("wrote {}", cfg.out_dir.display());
        }
        Command::Report { input } => {
            let out = report(&input).with_context(|| format!("reading {}", input.display()))?;
            print_table(&out.summary);
        }
    }
    Ok(())
}
