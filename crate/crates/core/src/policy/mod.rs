//! Episodic explore-then-commit pricing.
//!
//! Each episode opens with uniform random prices on `[0, B]`. The episode's
//! exploration buffer then fits a mean-utility estimator and a kernel noise
//! CDF, and every remaining period of the episode is priced greedily through
//! the estimated virtual-valuation map. Nothing carries over between
//! episodes.

mod phi;
mod schedule;

pub use phi::{price_map, Inversion, InversionPath, InversionStats, PhiFunction};
pub use schedule::{exploration_length, Episode, EpisodeSchedule, ExplorationRule};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::harness::{Phase, RegretTrace};
use crate::market_env::{MarketEnvironment, NoiseLaw};
use crate::nn_regress::{EstimatorKind, LabeledSample, MeanEstimator, NnRegressor};
use crate::noise_cdf::{bandwidth, CdfEstimate, CdfModel, KernelSpec};
use crate::{Error, Result};

/// Knobs shared by every episodic policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub estimator: EstimatorKind,
    pub n0: usize,
    pub episodes: usize,
    /// Smoothness order used by the bandwidth and exploration rules.
    pub m: u32,
    pub bandwidth_c: f64,
    pub exploration_rule: ExplorationRule,
    /// Floor on the estimated density inside `phi`.
    pub eps_floor: f64,
    /// Inversion interval; `None` picks a default from the noise law.
    pub working_interval: Option<(f64, f64)>,
    pub kernel: KernelSpec,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            estimator: EstimatorKind::Dnn,
            n0: 200,
            episodes: 6,
            m: 2,
            bandwidth_c: 6.0,
            exploration_rule: ExplorationRule::Smoothness,
            eps_floor: 1e-3,
            working_interval: None,
            kernel: KernelSpec::sim(),
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n0 < 2 {
            return Err(Error::config("n0", "must be at least 2"));
        }
        if self.episodes == 0 {
            return Err(Error::config("episodes", "must be at least 1"));
        }
        if self.m < 2 {
            return Err(Error::config("m", "must be at least 2"));
        }
        if !(self.bandwidth_c > 0.0 && self.bandwidth_c.is_finite()) {
            return Err(Error::config("bandwidth_c", "must be positive"));
        }
        if !(self.eps_floor > 0.0 && self.eps_floor.is_finite()) {
            return Err(Error::config("eps_floor", "must be positive"));
        }
        Ok(())
    }

    pub fn schedule(&self, d: usize) -> Result<EpisodeSchedule> {
        EpisodeSchedule::new(self.n0, self.episodes, d, self.m, self.exploration_rule)
    }

    /// `[-1, 1]` for the quartic simulation noise, otherwise the noise
    /// support widened by 0.5 on each side.
    pub fn interval_for(&self, env: &MarketEnvironment) -> (f64, f64) {
        self.working_interval.unwrap_or_else(|| match env.noise().law() {
            NoiseLaw::QuarticSim => (-1.0, 1.0),
            _ => {
                let w = env.noise_bound() + 0.5;
                (-w, w)
            }
        })
    }
}

/// Independent random streams for one trial: the market stream draws
/// contexts and noise, the pricing stream draws exploration prices. Policies
/// run on the same seed therefore face the same customers.
#[derive(Debug, Clone)]
pub struct RngStreams {
    seed: u64,
    market: ChaCha8Rng,
    pricing: ChaCha8Rng,
}

impl RngStreams {
    pub fn from_seed(seed: u64) -> Self {
        let mut market = ChaCha8Rng::seed_from_u64(seed);
        market.set_stream(0);
        let mut pricing = ChaCha8Rng::seed_from_u64(seed);
        pricing.set_stream(1);
        Self { seed, market, pricing }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Uniform price on `[0, B]`.
pub fn explore_price<R: Rng + ?Sized>(rng: &mut R, price_bound: f64) -> f64 {
    price_bound * rng.random::<f64>()
}

/// Prices commitment-phase arrivals.
pub(crate) trait CommitPricer {
    fn price(&self, x: &[f64], stats: &mut InversionStats) -> f64;
}

/// `clip(mean(x) + phi^{-1}(-mean(x)), 0, B)`.
pub(crate) struct PlugInPricer<E, M> {
    pub mean: E,
    pub phi: PhiFunction<M>,
    pub price_bound: f64,
}

impl<E: MeanEstimator, M: CdfModel> CommitPricer for PlugInPricer<E, M> {
    fn price(&self, x: &[f64], stats: &mut InversionStats) -> f64 {
        let (p, inv) = price_map(&self.phi, self.mean.predict(x), self.price_bound);
        stats.record(&inv);
        p
    }
}

/// Kernel CDF fit on residuals of `mean` over the buffer, wrapped into a
/// plug-in pricer.
pub(crate) fn kernel_plugin<'a, E: MeanEstimator + 'a>(
    buffer: &'a LabeledSample,
    mean: E,
    env: &MarketEnvironment,
    config: &PolicyConfig,
) -> Result<Box<dyn CommitPricer + 'a>> {
    let b = bandwidth(buffer.len(), config.m, config.bandwidth_c);
    let cdf = CdfEstimate::fit(buffer, &mean, b, config.kernel)?;
    let (lo, hi) = config.interval_for(env);
    Ok(Box::new(PlugInPricer {
        mean,
        phi: PhiFunction::new(cdf, config.eps_floor, lo, hi)?,
        price_bound: env.price_bound(),
    }))
}

fn log_period(trace: &mut RegretTrace, env: &MarketEnvironment, x: &[f64], episode: usize, phase: Phase, price: f64) {
    let mean = env.mean_utility(x).expect("context drawn from env");
    let (oracle_price, oracle_revenue) = env.oracle_at_mean(mean);
    trace.push(
        episode,
        phase,
        price,
        oracle_price,
        env.revenue_at_mean(mean, price),
        oracle_revenue,
    );
}

/// The explore-then-commit skeleton. `fit` turns an episode's exploration
/// buffer into a commitment-phase pricer.
pub(crate) fn run_episodic<F>(
    env: &MarketEnvironment,
    config: &PolicyConfig,
    rng: &mut RngStreams,
    trial: usize,
    mut fit: F,
) -> Result<RegretTrace>
where
    F: for<'a> FnMut(&'a LabeledSample) -> Result<Box<dyn CommitPricer + 'a>>,
{
    config.validate()?;
    let schedule = config.schedule(env.dimension())?;
    let b = env.price_bound();
    let mut trace = RegretTrace::new(trial, rng.seed);
    trace.records.reserve(schedule.horizon());
    for ep in schedule.episodes() {
        let mut buffer = LabeledSample::new(env.dimension());
        for _ in ep.exploration_periods() {
            let x = env.sample_context(&mut rng.market);
            let eps = env.sample_noise(&mut rng.market);
            let p = explore_price(&mut rng.pricing, b);
            let sale = env.realize_demand(&x, p, eps)?;
            buffer.push_observation(&x, p, sale, b);
            log_period(&mut trace, env, &x, ep.index, Phase::Exploration, p);
        }
        let pricer = fit(&buffer)?;
        let mut stats = InversionStats::default();
        for _ in ep.commitment_periods() {
            let x = env.sample_context(&mut rng.market);
            // drawn to keep the market stream aligned across policies
            let _eps = env.sample_noise(&mut rng.market);
            let p = pricer.price(&x, &mut stats);
            log_period(&mut trace, env, &x, ep.index, Phase::Commitment, p);
        }
        trace.inversions.merge(&stats);
    }
    Ok(trace)
}

/// Explore-then-commit with a DNN or TDNN mean estimate and a kernel noise
/// CDF, refit from scratch in every episode.
pub fn run_algorithm1(env: &MarketEnvironment, config: &PolicyConfig, rng: &mut RngStreams, trial: usize) -> Result<RegretTrace> {
    run_episodic(env, config, rng, trial, |buffer| {
        let mean = NnRegressor::fit_auto(buffer, config.estimator)?;
        kernel_plugin(buffer, mean, env, config)
    })
}

/// Full-information benchmark: every period priced at the true optimum.
pub fn run_oracle(env: &MarketEnvironment, config: &PolicyConfig, rng: &mut RngStreams, trial: usize) -> Result<RegretTrace> {
    run_fixed_rule(env, config, rng, trial, |env, x, _| {
        env.oracle_price(x).expect("context drawn from env").price
    })
}

/// Uniform random price in every period.
pub fn run_uniform_random(env: &MarketEnvironment, config: &PolicyConfig, rng: &mut RngStreams, trial: usize) -> Result<RegretTrace> {
    run_fixed_rule(env, config, rng, trial, |env, _, pricing| explore_price(pricing, env.price_bound()))
}

fn run_fixed_rule<F>(env: &MarketEnvironment, config: &PolicyConfig, rng: &mut RngStreams, trial: usize, rule: F) -> Result<RegretTrace>
where
    F: Fn(&MarketEnvironment, &[f64], &mut ChaCha8Rng) -> f64,
{
    config.validate()?;
    let schedule = config.schedule(env.dimension())?;
    let mut trace = RegretTrace::new(trial, rng.seed);
    for ep in schedule.episodes() {
        for t in ep.start..=ep.end() {
            let x = env.sample_context(&mut rng.market);
            let _eps = env.sample_noise(&mut rng.market);
            let phase = if t < ep.start + ep.exploration {
                Phase::Exploration
            } else {
                Phase::Commitment
            };
            let p = rule(env, &x, &mut rng.pricing);
            log_period(&mut trace, env, &x, ep.index, phase, p);
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> PolicyConfig {
        PolicyConfig {
            n0: 100,
            episodes: 3,
            ..PolicyConfig::default()
        }
    }

    #[test]
    fn explore_price_contract() {
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let p = explore_price(&mut a, 6.5);
            assert!((0.0..=6.5).contains(&p));
            assert_eq!(p, explore_price(&mut b, 6.5));
            sum += p;
        }
        assert!((sum / n as f64 - 3.25).abs() < 0.065);
    }

    #[test]
    fn oracle_policy_has_zero_regret() {
        let env = MarketEnvironment::quadratic_sim();
        let trace = run_oracle(&env, &small_config(), &mut RngStreams::from_seed(5), 0).unwrap();
        assert_eq!(trace.horizon(), 700);
        assert!(trace.final_regret() <= 1e-9);
    }

    #[test]
    fn dnn_policy_bookkeeping() {
        let env = MarketEnvironment::quadratic_sim();
        let cfg = small_config();
        let trace = run_algorithm1(&env, &cfg, &mut RngStreams::from_seed(8), 2).unwrap();
        let schedule = cfg.schedule(3).unwrap();
        assert_eq!(trace.horizon(), schedule.horizon());
        let mut last = 0.0;
        for r in &trace.records {
            assert!((0.0..=env.price_bound()).contains(&r.price));
            assert!(r.instant_regret >= 0.0);
            assert!(r.cum_regret >= last);
            last = r.cum_regret;
        }
        for ep in schedule.episodes() {
            let exp = trace
                .records
                .iter()
                .filter(|r| r.episode == ep.index && r.phase == Phase::Exploration)
                .count();
            let com = trace
                .records
                .iter()
                .filter(|r| r.episode == ep.index && r.phase == Phase::Commitment)
                .count();
            assert_eq!(exp, ep.exploration);
            assert_eq!(exp + com, ep.length);
        }
        let commits: u64 = trace.inversions.newton + trace.inversions.fallback + trace.inversions.clamped;
        assert_eq!(commits as usize, schedule.episodes().iter().map(|e| e.commitment()).sum::<usize>());
    }

    #[test]
    fn same_seed_same_trace() {
        let env = MarketEnvironment::quadratic_sim();
        let cfg = PolicyConfig {
            estimator: EstimatorKind::Tdnn,
            ..small_config()
        };
        let a = run_algorithm1(&env, &cfg, &mut RngStreams::from_seed(13), 0).unwrap();
        let b = run_algorithm1(&env, &cfg, &mut RngStreams::from_seed(13), 0).unwrap();
        assert_eq!(a, b);
        let c = run_algorithm1(&env, &cfg, &mut RngStreams::from_seed(14), 0).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn policies_share_customers() {
        let env = MarketEnvironment::quadratic_sim();
        let cfg = small_config();
        let dnn = run_algorithm1(&env, &cfg, &mut RngStreams::from_seed(21), 0).unwrap();
        let oracle = run_oracle(&env, &cfg, &mut RngStreams::from_seed(21), 0).unwrap();
        for (a, b) in dnn.records.iter().zip(&oracle.records) {
            assert_eq!(a.oracle_price, b.oracle_price);
        }
    }

    #[test]
    fn invalid_config_names_field() {
        let env = MarketEnvironment::quadratic_sim();
        let cfg = PolicyConfig {
            bandwidth_c: -1.0,
            ..small_config()
        };
        let err = run_algorithm1(&env, &cfg, &mut RngStreams::from_seed(1), 0).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { field: "bandwidth_c", .. }));
    }
}
