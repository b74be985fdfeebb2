use pricelab::baselines::{fit_gaussian_sigma, fit_linear};
use pricelab::harness::{run_policy_trials, EnvironmentName, PolicyName, RunConfig};
use pricelab::market_env::MarketEnvironment;
use pricelab::nn_regress::{LabeledSample, MeanEstimator};
use pricelab::policy::explore_price;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn median_final(config: &RunConfig, policy: PolicyName) -> f64 {
    let mut v: Vec<f64> = run_policy_trials(config, policy)
        .unwrap()
        .iter()
        .map(|t| t.final_regret())
        .collect();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn well_specified_gaussian_control() {
    let mut c = RunConfig::new(EnvironmentName::LinearGaussian);
    c.episodes = 5;
    c.trials = 5;
    c.seed = 3;
    let rmlp = median_final(&c, PolicyName::Rmlp2);
    let linear = median_final(&c, PolicyName::LinearKernel);
    let uniform = median_final(&c, PolicyName::UniformRandom);
    assert!(rmlp <= 2.0 * linear && linear <= 2.0 * rmlp, "rmlp2 {rmlp}, linear_kernel {linear}");
    assert!(rmlp < 0.5 * uniform, "rmlp2 {rmlp}, uniform {uniform}");
}

#[test]
fn linear_mean_is_recovered_on_a_linear_market() {
    let c = RunConfig::new(EnvironmentName::LinearSim);
    let env: MarketEnvironment = c.build_environment().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let b = env.price_bound();
    let mut s = LabeledSample::new(3);
    for _ in 0..20_000 {
        let x = env.sample_context(&mut rng);
        let eps = env.sample_noise(&mut rng);
        let p = explore_price(&mut rng, b);
        s.push_observation(&x, p, env.realize_demand(&x, p, eps).unwrap(), b);
    }
    let fit = fit_linear(&s).unwrap();
    // E[B y | x] equals the mean utility when the value stays inside [0, B]
    for x in [[0.2, 0.4, 1.9], [1.0, 1.0, 1.0], [1.8, 0.1, 0.7]] {
        assert!((fit.predict(&x) - env.mean_utility(&x).unwrap()).abs() < 0.1);
    }
    let sigma = fit_gaussian_sigma(&s, &fit).unwrap();
    assert!(!sigma.degenerate);
    // quartic noise has standard deviation sqrt(0.05)
    assert!((sigma.sigma - 0.05f64.sqrt()).abs() < 0.1, "{}", sigma.sigma);
}

#[test]
fn baselines_are_deterministic() {
    let mut c = RunConfig::new(EnvironmentName::QuadraticSim);
    c.episodes = 3;
    c.trials = 2;
    for policy in [PolicyName::LinearKernel, PolicyName::Rmlp2] {
        assert_eq!(run_policy_trials(&c, policy).unwrap(), run_policy_trials(&c, policy).unwrap());
    }
}
