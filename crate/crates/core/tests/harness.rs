use std::path::Path;

use pricelab::harness::{
    aggregate, exploitation_average, read_policy_traces, report, run_policy_trials, run_single, run_trials, trial_seed, EnvironmentName,
    PolicyName, RunConfig, DEFAULT_T0,
};
use pricelab::policy::ExplorationRule;
use pricelab::Error;
use proptest::prelude::*;

fn small(dir: &Path, policies: Vec<PolicyName>) -> RunConfig {
    let mut c = RunConfig::new(EnvironmentName::QuadraticSim);
    c.policy = policies;
    c.n0 = 100;
    c.episodes = 3;
    c.trials = 3;
    c.seed = 11;
    c.out_dir = dir.to_path_buf();
    c
}

fn parse_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn oracle_single_trial_has_zero_regret() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path(), vec![PolicyName::Oracle]);
    c.trials = 1;
    let out = run_trials(&c).unwrap();
    let (_, stats) = &out.stats[0];
    assert!(stats.mean.iter().all(|&r| r == 0.0));
    assert!(stats.se.iter().all(|&s| s == 0.0));
    assert_eq!(out.summary.policies[0].final_regret_mean, 0.0);
    assert!(out.summary.policies[0].slope.is_none());
}

#[test]
fn aggregate_matches_brute_force_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(dir.path(), vec![PolicyName::Dnn, PolicyName::UniformRandom]);
    run_trials(&c).unwrap();
    for policy in ["dnn", "uniform_random"] {
        let pdir = dir.path().join(policy);
        let trials: Vec<Vec<Vec<String>>> = (0..3).map(|i| parse_csv(&pdir.join(format!("trial_{i:04}.csv")))).collect();
        let agg = parse_csv(&pdir.join("aggregate.csv"));
        assert_eq!(agg.len(), 700);
        for (i, row) in agg.iter().enumerate() {
            let regs: Vec<f64> = trials.iter().map(|t| t[i][9].parse().unwrap()).collect();
            let mean = regs.iter().sum::<f64>() / 3.0;
            let var = regs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / 2.0;
            let se = (var / 3.0).sqrt();
            let got_mean: f64 = row[1].parse().unwrap();
            let got_se: f64 = row[2].parse().unwrap();
            assert!((got_mean - mean).abs() <= 1e-9 * mean.max(1.0), "{policy} t={}", i + 1);
            assert!((got_se - se).abs() <= 1e-9 * se.max(1.0));
            assert!(got_se >= 0.0);
            let ave: f64 = row[3].parse().unwrap();
            assert!((ave - mean / (i + 1) as f64).abs() <= 1e-12 * mean.max(1.0));
        }
    }
}

#[test]
fn report_recomputes_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path(), vec![PolicyName::LinearKernel, PolicyName::Tdnn]);
    c.episodes = 4;
    let run = run_trials(&c).unwrap();
    let again = report(dir.path()).unwrap();
    assert_eq!(run.summary, again.summary);
    for ((p, a), (q, b)) in run.stats.iter().zip(&again.stats) {
        assert_eq!(p, q);
        assert_eq!(a, b);
    }
}

#[test]
fn csv_traces_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(dir.path(), vec![PolicyName::Rmlp2]);
    run_trials(&c).unwrap();
    let disk = read_policy_traces(&dir.path().join("rmlp2")).unwrap();
    let memory = run_policy_trials(&c, PolicyName::Rmlp2).unwrap();
    assert_eq!(disk.len(), memory.len());
    for (a, b) in disk.iter().zip(&memory) {
        assert_eq!(a.trial, b.trial);
        assert_eq!(a.records, b.records);
    }
}

#[test]
fn seed_isolation() {
    let c = RunConfig::new(EnvironmentName::QuadraticSim);
    let env = c.build_environment().unwrap();
    let mut pc = c.policy_config(PolicyName::Dnn);
    pc.n0 = 100;
    pc.episodes = 3;
    let first = run_single(&env, &pc, PolicyName::Dnn, trial_seed(5, 0), 0).unwrap();
    let again = run_single(&env, &pc, PolicyName::Dnn, trial_seed(5, 0), 0).unwrap();
    assert_eq!(first, again);

    // through the harness: a different master seed changes every trial,
    // but each trial depends on its own seed only
    let mut a = small(Path::new("unused"), vec![PolicyName::UniformRandom]);
    a.trials = 2;
    let mut b = a.clone();
    b.trials = 4;
    let ta = run_policy_trials(&a, PolicyName::UniformRandom).unwrap();
    let tb = run_policy_trials(&b, PolicyName::UniformRandom).unwrap();
    assert_eq!(ta[0], tb[0]);
    assert_eq!(ta[1], tb[1]);
    assert_ne!(tb[2].records, tb[3].records);
}

#[test]
fn regret_is_additive() {
    let c = small(Path::new("unused"), vec![PolicyName::Dnn]);
    for trace in run_policy_trials(&c, PolicyName::Dnn).unwrap() {
        let total: f64 = trace.records.iter().map(|r| r.instant_regret).sum();
        assert!((total - trace.final_regret()).abs() <= 1e-9);
        let by_episode: f64 = (1..=3)
            .map(|k| {
                trace
                    .records
                    .iter()
                    .filter(|r| r.episode == k)
                    .map(|r| r.instant_regret)
                    .sum::<f64>()
            })
            .sum();
        assert!((by_episode - trace.final_regret()).abs() <= 1e-9);
    }
}

#[test]
fn unwritable_output_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let c = small(&blocker.join("sub"), vec![PolicyName::Oracle]);
    assert!(matches!(run_trials(&c), Err(Error::Io { .. })));
}

#[test]
fn exploitation_average_falls_across_episodes() {
    let mut c = RunConfig::new(EnvironmentName::QuadraticSim);
    c.trials = 5;
    c.seed = 77;
    let traces = run_policy_trials(&c, PolicyName::Dnn).unwrap();
    // running average at the last commitment period of each episode
    let per_episode: Vec<Vec<f64>> = traces
        .iter()
        .map(|t| {
            let series = exploitation_average(t);
            let commits: Vec<usize> = t
                .records
                .iter()
                .filter(|r| r.phase == pricelab::harness::Phase::Commitment)
                .map(|r| r.episode)
                .collect();
            (1..=6).map(|k| series[commits.iter().rposition(|&e| e == k).unwrap()]).collect()
        })
        .collect();
    let medians: Vec<f64> = (0..6)
        .map(|k| {
            let mut v: Vec<f64> = per_episode.iter().map(|e| e[k]).collect();
            v.sort_by(f64::total_cmp);
            v[2]
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
}

#[test]
fn calibration_run_reports_dimension_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = RunConfig::new(EnvironmentName::QuadraticCalibration);
    c.beta = Some(vec![0.2, 0.1, 0.15, 0.25]);
    c.exploration_rule = ExplorationRule::Dimension;
    c.m = 4;
    c.episodes = 5;
    c.trials = 2;
    c.out_dir = dir.path().to_path_buf();
    let out = run_trials(&c).unwrap();
    let p = &out.summary.policies[0];
    assert_eq!(out.summary.dimension, 4);
    assert!((p.benchmark_slope - 2.0 / 3.0).abs() < 1e-15);
    assert!(p.slope.is_some_and(f64::is_finite));
    assert!(p.final_regret_mean > 0.0);
}

#[test]
fn aggregate_rejects_mismatched_horizons() {
    let mut a = small(Path::new("unused"), vec![PolicyName::Oracle]);
    a.trials = 1;
    let mut b = a.clone();
    b.episodes = 2;
    let mut traces = run_policy_trials(&a, PolicyName::Oracle).unwrap();
    traces.extend(run_policy_trials(&b, PolicyName::Oracle).unwrap());
    assert!(aggregate(&traces, 3, DEFAULT_T0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cumulative_regret_is_monotone(seed in any::<u64>(), policy in prop::sample::select(vec![
        PolicyName::Dnn, PolicyName::Tdnn, PolicyName::LinearKernel, PolicyName::Rmlp2, PolicyName::UniformRandom,
    ])) {
        let c = RunConfig::new(EnvironmentName::QuadraticSim);
        let env = c.build_environment().unwrap();
        let mut pc = c.policy_config(policy);
        pc.n0 = 40;
        pc.episodes = 3;
        let trace = run_single(&env, &pc, policy, seed, 0).unwrap();
        prop_assert_eq!(trace.horizon(), 280);
        for w in trace.records.windows(2) {
            prop_assert!(w[1].cum_regret >= w[0].cum_regret);
        }
        for r in &trace.records {
            prop_assert!(r.instant_regret >= -1e-9);
            prop_assert!((0.0..=env.price_bound()).contains(&r.price));
        }
    }
}
