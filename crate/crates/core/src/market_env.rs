//! Synthetic ground-truth markets.
//!
//! A market posts a price `p` to a customer with context `x`; the customer's
//! valuation is `v = mu(x) + eps` and a sale happens when `v >= p`. The
//! environment knows `mu` and the law of `eps`, so it can compute expected
//! revenue and the revenue-maximizing price for any context.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::noise_cdf::CdfModel;
use crate::optim::grid_then_golden_max;
use crate::{Error, Result};

/// Number of points in the inverse-CDF sampling table.
pub const INVERSE_TABLE_SIZE: usize = 4097;

const ORACLE_GRID_STEPS: usize = 2000;
const ORACLE_TOL: f64 = 1e-11;

/// Independent uniform law per context coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextLaw {
    bounds: Vec<(f64, f64)>,
}

impl ContextLaw {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::config("dimension", "must be positive"));
        }
        if bounds.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
            return Err(Error::config("dimension", "context bounds must be finite with lo <= hi"));
        }
        Ok(Self { bounds })
    }

    /// `d` coordinates, each uniform on `[lo, hi]`.
    pub fn uniform(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, hi); d])
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.bounds.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect()
    }
}

/// Functional form of the mean utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MeanUtility {
    /// `sum_i 2 (x_i - 1)^2`.
    QuadraticSim,
    /// `sum_i beta_i x_i^2`.
    QuadraticCalibration { beta: Vec<f64> },
    /// `intercept + sum_i coef_i x_i`.
    Linear { coef: Vec<f64>, intercept: f64 },
}

impl MeanUtility {
    fn term(&self, i: usize, x: f64) -> f64 {
        match self {
            MeanUtility::QuadraticSim => 2.0 * (x - 1.0) * (x - 1.0),
            MeanUtility::QuadraticCalibration { beta } => beta[i] * x * x,
            MeanUtility::Linear { coef, .. } => coef[i] * x,
        }
    }

    fn offset(&self) -> f64 {
        match self {
            MeanUtility::Linear { intercept, .. } => *intercept,
            _ => 0.0,
        }
    }

    fn coefficient_len(&self) -> Option<usize> {
        match self {
            MeanUtility::QuadraticSim => None,
            MeanUtility::QuadraticCalibration { beta } => Some(beta.len()),
            MeanUtility::Linear { coef, .. } => Some(coef.len()),
        }
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.offset() + x.iter().enumerate().map(|(i, &xi)| self.term(i, xi)).sum::<f64>()
    }

    /// Exact `(min, max)` over a box; every built-in form is a sum of
    /// one-dimensional terms that are monotone or convex.
    fn range_over(&self, bounds: &[(f64, f64)]) -> (f64, f64) {
        let mut lo_sum = self.offset();
        let mut hi_sum = self.offset();
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            let mut candidates = vec![self.term(i, lo), self.term(i, hi)];
            let stationary = match self {
                MeanUtility::QuadraticSim => Some(1.0),
                MeanUtility::QuadraticCalibration { .. } => Some(0.0),
                MeanUtility::Linear { .. } => None,
            };
            if let Some(c) = stationary {
                if lo < c && c < hi {
                    candidates.push(self.term(i, c));
                }
            }
            lo_sum += candidates.iter().copied().fold(f64::INFINITY, f64::min);
            hi_sum += candidates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        (lo_sum, hi_sum)
    }
}

/// Closed-form noise densities, all symmetric about zero with compact support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NoiseLaw {
    /// `f(z) = 6 (1/4 - z^2)` on `|z| <= 1/2`.
    QuarticSim,
    /// `f(z) ∝ (1 - (z/3)^2)^4` on `|z| <= 3`.
    OcticCalibration,
    /// Gaussian with scale `sigma` truncated to `|z| <= half_width`.
    TruncatedGaussian { sigma: f64, half_width: f64 },
}

// Antiderivative of (1 - z^2/9)^4 vanishing at 0.
fn octic_antiderivative(z: f64) -> f64 {
    const BINOM: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];
    let z2 = z * z / 9.0;
    let mut pow = 1.0;
    let mut acc = 0.0;
    for (k, b) in BINOM.iter().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * b * pow / (2 * k + 1) as f64;
        pow *= z2;
    }
    z * acc
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

impl NoiseLaw {
    /// `B_eps`: the noise lives on `[-B_eps, B_eps]`.
    pub fn half_width(&self) -> f64 {
        match self {
            NoiseLaw::QuarticSim => 0.5,
            NoiseLaw::OcticCalibration => 3.0,
            NoiseLaw::TruncatedGaussian { half_width, .. } => *half_width,
        }
    }

    /// Smoothness order of the density, used for kernel bandwidth rules.
    pub fn smoothness_order(&self) -> u32 {
        match self {
            NoiseLaw::QuarticSim => 2,
            NoiseLaw::OcticCalibration => 4,
            NoiseLaw::TruncatedGaussian { .. } => 2,
        }
    }

    pub fn pdf(&self, z: f64) -> f64 {
        let a = self.half_width();
        if z.abs() > a {
            return 0.0;
        }
        match self {
            NoiseLaw::QuarticSim => 6.0 * (0.25 - z * z),
            NoiseLaw::OcticCalibration => {
                let norm = 0.5 / octic_antiderivative(3.0);
                norm * (1.0 - z * z / 9.0).powi(4)
            }
            NoiseLaw::TruncatedGaussian { sigma, half_width } => {
                let mass = 1.0 - 2.0 * std_normal_cdf(-half_width / sigma);
                let u = z / sigma;
                (-0.5 * u * u).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sigma * mass)
            }
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        let a = self.half_width();
        if z <= -a {
            return 0.0;
        }
        if z >= a {
            return 1.0;
        }
        let raw = match self {
            NoiseLaw::QuarticSim => 0.5 + 1.5 * z - 2.0 * z * z * z,
            NoiseLaw::OcticCalibration => 0.5 + 0.5 * octic_antiderivative(z) / octic_antiderivative(3.0),
            NoiseLaw::TruncatedGaussian { sigma, half_width } => {
                let tail = std_normal_cdf(-half_width / sigma);
                (std_normal_cdf(z / sigma) - tail) / (1.0 - 2.0 * tail)
            }
        };
        raw.clamp(0.0, 1.0)
    }
}

/// A noise law together with its inverse-CDF sampling table.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    law: NoiseLaw,
    quantiles: Vec<f64>,
}

impl NoiseSpec {
    pub fn new(law: NoiseLaw) -> Result<Self> {
        if let NoiseLaw::TruncatedGaussian { sigma, half_width } = law {
            if !(sigma > 0.0 && half_width > 0.0) {
                return Err(Error::config("environment", "gaussian noise needs sigma > 0 and half_width > 0"));
            }
        }
        let a = law.half_width();
        let last = INVERSE_TABLE_SIZE - 1;
        let quantiles = (0..INVERSE_TABLE_SIZE)
            .map(|i| {
                if i == 0 {
                    return -a;
                }
                if i == last {
                    return a;
                }
                let u = i as f64 / last as f64;
                let (mut lo, mut hi) = (-a, a);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if law.cdf(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= f64::EPSILON * a {
                        break;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        Ok(Self { law, quantiles })
    }

    pub fn quartic_sim() -> Self {
        Self::new(NoiseLaw::QuarticSim).expect("built-in law")
    }

    pub fn octic_calibration() -> Self {
        Self::new(NoiseLaw::OcticCalibration).expect("built-in law")
    }

    pub fn law(&self) -> &NoiseLaw {
        &self.law
    }

    pub fn half_width(&self) -> f64 {
        self.law.half_width()
    }

    /// Inverse CDF through the table with linear interpolation.
    pub fn quantile(&self, u: f64) -> f64 {
        let last = (INVERSE_TABLE_SIZE - 1) as f64;
        let pos = u.clamp(0.0, 1.0) * last;
        let i = (pos.floor() as usize).min(INVERSE_TABLE_SIZE - 2);
        let frac = pos - i as f64;
        self.quantiles[i] + frac * (self.quantiles[i + 1] - self.quantiles[i])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    pub fn cdf(&self, z: f64) -> f64 {
        self.law.cdf(z)
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.law.pdf(z)
    }
}

impl CdfModel for NoiseSpec {
    fn cdf(&self, z: f64) -> f64 {
        self.law.cdf(z)
    }

    fn density(&self, z: f64) -> Option<f64> {
        Some(self.law.pdf(z))
    }
}

/// Revenue-maximizing price for one context.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub context: Vec<f64>,
    pub price: f64,
    pub revenue: f64,
}

/// The ground-truth market. Immutable once built.
#[derive(Debug, Clone)]
pub struct MarketEnvironment {
    context_law: ContextLaw,
    mean_utility: MeanUtility,
    noise: NoiseSpec,
    price_bound: f64,
}

impl MarketEnvironment {
    pub fn new(context_law: ContextLaw, mean_utility: MeanUtility, noise: NoiseSpec, price_bound: f64) -> Result<Self> {
        let d = context_law.dimension();
        if let Some(len) = mean_utility.coefficient_len() {
            if len != d {
                return Err(Error::config("beta", format!("expected {d} coefficients, got {len}")));
            }
        }
        if !(price_bound.is_finite() && price_bound > 0.0) {
            return Err(Error::config("B", "must be positive and finite"));
        }
        let env = Self {
            context_law,
            mean_utility,
            noise,
            price_bound,
        };
        let top = env.value_bound();
        if top > price_bound + 1e-12 {
            return Err(Error::config(
                "B",
                format!("price bound {price_bound} is below the largest market value {top}"),
            ));
        }
        Ok(env)
    }

    /// Three-dimensional quadratic utility on `[0, 2]^3` with quartic noise, `B = 6.5`.
    pub fn quadratic_sim() -> Self {
        Self::new(
            ContextLaw::uniform(3, 0.0, 2.0).expect("valid bounds"),
            MeanUtility::QuadraticSim,
            NoiseSpec::quartic_sim(),
            6.5,
        )
        .expect("built-in environment")
    }

    /// `beta^T x^2` utility with octic noise; contexts uniform on `[0, 2]^d`, `B = 6` by default.
    pub fn quadratic_calibration(beta: Vec<f64>, price_bound: Option<f64>) -> Result<Self> {
        let d = beta.len();
        Self::new(
            ContextLaw::uniform(d, 0.0, 2.0)?,
            MeanUtility::QuadraticCalibration { beta },
            NoiseSpec::octic_calibration(),
            price_bound.unwrap_or(6.0),
        )
    }

    pub fn dimension(&self) -> usize {
        self.context_law.dimension()
    }

    pub fn context_law(&self) -> &ContextLaw {
        &self.context_law
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn mean_form(&self) -> &MeanUtility {
        &self.mean_utility
    }

    /// `B`.
    pub fn price_bound(&self) -> f64 {
        self.price_bound
    }

    /// `B_eps`.
    pub fn noise_bound(&self) -> f64 {
        self.noise.half_width()
    }

    /// `B_v`: largest attainable market value.
    pub fn value_bound(&self) -> f64 {
        self.mean_range().1 + self.noise_bound()
    }

    /// Exact range of the mean utility over the context support.
    pub fn mean_range(&self) -> (f64, f64) {
        self.mean_utility.range_over(self.context_law.bounds())
    }

    pub fn sample_context<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.context_law.sample(rng)
    }

    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.noise.sample(rng)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn mean_utility(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.mean_utility.eval_unchecked(x))
    }

    pub fn noise_cdf(&self, z: f64) -> f64 {
        self.noise.cdf(z)
    }

    /// Sale indicator for a customer with context `x` and noise draw `noise`.
    pub fn realize_demand(&self, x: &[f64], price: f64, noise: f64) -> Result<bool> {
        Ok(demand_from_value(self.mean_utility(x)? + noise, price))
    }

    pub fn expected_revenue(&self, x: &[f64], price: f64) -> Result<f64> {
        Ok(self.revenue_at_mean(self.mean_utility(x)?, price))
    }

    /// `p (1 - F(p - mean))`.
    pub fn revenue_at_mean(&self, mean: f64, price: f64) -> f64 {
        price * (1.0 - self.noise.cdf(price - mean))
    }

    pub fn oracle_price(&self, x: &[f64]) -> Result<OracleSolution> {
        let mean = self.mean_utility(x)?;
        let (price, revenue) = self.oracle_at_mean(mean);
        Ok(OracleSolution {
            context: x.to_vec(),
            price,
            revenue,
        })
    }

    /// Grid over `[0, B]` with step `B/2000`, then golden-section refinement.
    pub fn oracle_at_mean(&self, mean: f64) -> (f64, f64) {
        let grid = price_grid(self.price_bound, ORACLE_GRID_STEPS);
        grid_then_golden_max(|p| self.revenue_at_mean(mean, p), &grid, ORACLE_TOL)
    }
}

/// `1` iff the valuation covers the price.
pub fn demand_from_value(value: f64, price: f64) -> bool {
    value >= price
}

pub(crate) fn price_grid(bound: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| bound * i as f64 / steps as f64).collect()
}
