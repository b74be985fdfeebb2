//! Multi-trial experiments: configuration, seeding, aggregation and
//! persistence.
//!
//! Output layout under `out_dir`:
//!
//! ```text
//! summary.json
//! <policy>/trial_0000.csv
//! <policy>/aggregate.csv
//! ```

mod aggregate;
mod config;
mod trace;

pub use aggregate::{
    adjusted_log_regret, adjusted_log_regret_at, aggregate, exploitation_average, ls_slope, slope_diagnostic, slope_of_series,
    AggregateStats, DEFAULT_T0,
};
pub use config::{EnvironmentName, PolicyName, RunConfig};
pub use trace::{fmt17, PeriodRecord, Phase, RegretTrace, TRACE_HEADER};

use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{linear_kernel_policy, rmlp2_policy};
use crate::market_env::MarketEnvironment;
use crate::policy::{run_algorithm1, run_oracle, run_uniform_random, InversionStats, PolicyConfig, RngStreams};
use crate::{Error, Result};

pub const AGGREGATE_HEADER: [&str; 6] = [
    "t",
    "mean_cum_regret",
    "se_cum_regret",
    "ave_regret",
    "exploitation_average",
    "adjusted_log_regret",
];

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` under master seed `master`.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    splitmix64(master ^ splitmix64(trial as u64))
}

/// One trial of `policy` from a fixed seed.
pub fn run_single(env: &MarketEnvironment, config: &PolicyConfig, policy: PolicyName, seed: u64, trial: usize) -> Result<RegretTrace> {
    let mut rng = RngStreams::from_seed(seed);
    match policy {
        PolicyName::Dnn | PolicyName::Tdnn => run_algorithm1(env, config, &mut rng, trial),
        PolicyName::LinearKernel => linear_kernel_policy(env, config, &mut rng, trial),
        PolicyName::Rmlp2 => rmlp2_policy(env, config, &mut rng, trial),
        PolicyName::Oracle => run_oracle(env, config, &mut rng, trial),
        PolicyName::UniformRandom => run_uniform_random(env, config, &mut rng, trial),
    }
}

/// All trials of one policy in memory, in trial order.
pub fn run_policy_trials(config: &RunConfig, policy: PolicyName) -> Result<Vec<RegretTrace>> {
    let env = config.build_environment()?;
    let pc = config.policy_config(policy);
    (0..config.trials)
        .into_par_iter()
        .map(|trial| run_single(&env, &pc, policy, trial_seed(config.seed, trial), trial))
        .collect()
}

/// Periods of the last three episodes (or all of them when there are fewer).
pub fn default_slope_window(config: &RunConfig) -> RangeInclusive<usize> {
    let first = config.episodes.saturating_sub(2).max(1);
    let start: usize = (1..first).map(|k| config.n0 << (k - 1)).sum::<usize>() + 1;
    let horizon: usize = (1..=config.episodes).map(|k| config.n0 << (k - 1)).sum();
    start..=horizon
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: PolicyName,
    pub trials: usize,
    pub horizon: usize,
    pub final_regret_mean: f64,
    pub final_regret_se: f64,
    pub ave_regret: f64,
    pub exploitation_average: Option<f64>,
    pub slope: Option<f64>,
    pub slope_window: (usize, usize),
    pub benchmark_slope: f64,
    pub inversions: InversionStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub dimension: usize,
    pub t0: usize,
    pub policies: Vec<PolicySummary>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub stats: Vec<(PolicyName, AggregateStats)>,
    pub summary: RunSummary,
}

fn summarize(config: &RunConfig, policy: PolicyName, stats: &AggregateStats, inversions: InversionStats) -> PolicySummary {
    let window = default_slope_window(config);
    PolicySummary {
        policy,
        trials: stats.trials,
        horizon: stats.horizon(),
        final_regret_mean: stats.final_regret(),
        final_regret_se: stats.final_se(),
        ave_regret: stats.final_ave_regret(),
        exploitation_average: stats.final_exploitation(),
        slope: slope_diagnostic(stats, window.clone()).ok(),
        slope_window: (*window.start(), *window.end()),
        benchmark_slope: config.exploration_rule.exponent(stats.dimension, config.m),
        inversions,
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

pub fn write_aggregate_csv(stats: &AggregateStats, path: &Path) -> Result<()> {
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(AGGREGATE_HEADER).map_err(io)?;
    for i in 0..stats.horizon() {
        w.write_record([
            (i + 1).to_string(),
            fmt17(stats.mean[i]),
            fmt17(stats.se[i]),
            fmt17(stats.ave_regret[i]),
            opt(stats.exploitation[i]),
            opt(stats.adjusted[i]),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_summary(summary: &RunSummary, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn trial_file(trial: usize) -> String {
    format!("trial_{trial:04}.csv")
}

/// Runs every configured policy and writes traces, aggregates and the
/// summary under `config.out_dir`.
pub fn run_trials(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let env = config.build_environment()?;
    let d = env.dimension();
    create_dir(&config.out_dir)?;
    let mut stats = Vec::new();
    let mut policies = Vec::new();
    for &policy in &config.policy {
        let traces = run_policy_trials(config, policy)?;
        let dir = config.out_dir.join(policy.as_str());
        create_dir(&dir)?;
        for t in &traces {
            t.write_csv(&dir.join(trial_file(t.trial)))?;
        }
        let agg = aggregate(&traces, d, DEFAULT_T0)?;
        write_aggregate_csv(&agg, &dir.join("aggregate.csv"))?;
        let mut inv = InversionStats::default();
        traces.iter().for_each(|t| inv.merge(&t.inversions));
        policies.push(summarize(config, policy, &agg, inv));
        stats.push((policy, agg));
    }
    let summary = RunSummary {
        config: config.clone(),
        dimension: d,
        t0: DEFAULT_T0,
        policies,
    };
    write_summary(&summary, &config.out_dir.join("summary.json"))?;
    Ok(RunOutput { stats, summary })
}

fn read_summary(dir: &Path) -> Result<RunSummary> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path,
        reason: e.to_string(),
    })
}

/// Trial CSVs of one policy directory, in file-name order.
pub fn read_policy_traces(dir: &Path) -> Result<Vec<RegretTrace>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("trial_") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    files.iter().map(|p| RegretTrace::read_csv(p)).collect()
}

/// Recomputes aggregates and diagnostics from the CSVs of a finished run.
/// Inversion counters are not stored per period, so they are carried over
/// from the run's summary.
pub fn report(input: &Path) -> Result<RunOutput> {
    let previous = read_summary(input)?;
    let mut stats = Vec::new();
    let mut policies = Vec::new();
    for old in &previous.policies {
        let traces = read_policy_traces(&input.join(old.policy.as_str()))?;
        let agg = aggregate(&traces, previous.dimension, previous.t0)?;
        policies.push(summarize(&previous.config, old.policy, &agg, old.inversions));
        stats.push((old.policy, agg));
    }
    Ok(RunOutput {
        stats,
        summary: RunSummary { policies, ..previous },
    })
}
