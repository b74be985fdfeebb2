//! Linear-utility comparison policies.
//!
//! Both fit `g_t = B y_t` on `x_t` by least squares during exploration. The
//! linear-kernel policy keeps the nonparametric noise CDF; the RMLP-2 style
//! policy assumes Gaussian noise and fits its scale by maximum likelihood.

use nalgebra::{DMatrix, DVector};
use statrs::function::erf::erfc;

use crate::harness::RegretTrace;
use crate::market_env::MarketEnvironment;
use crate::nn_regress::{LabeledSample, MeanEstimator};
use crate::noise_cdf::CdfModel;
use crate::optim::golden_section_max;
use crate::policy::{kernel_plugin, run_episodic, PhiFunction, PlugInPricer, PolicyConfig, RngStreams};
use crate::{Error, Result};

const RIDGE: f64 = 1e-8;
const SIGMA_MIN: f64 = 0.05;
const SIGMA_MAX: f64 = 5.0;
const SIGMA_GRID: usize = 64;

/// Ordinary least squares with intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    pub intercept: f64,
    /// Set when the normal equations needed the ridge term.
    pub ridged: bool,
}

impl MeanEstimator for LinearFit {
    fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// Solves the normal equations by Cholesky, retrying with a `1e-8` ridge
/// when the Gram matrix is not positive definite.
pub fn fit_linear(sample: &LabeledSample) -> Result<LinearFit> {
    let d = sample.dimension();
    let n = sample.len();
    if n < d + 2 {
        return Err(Error::TooFewObservations { n, need: d + 2 });
    }
    let p = d + 1;
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut row = vec![1.0; p];
    for (x, &g) in sample.contexts().zip(sample.responses()) {
        row[1..].copy_from_slice(x);
        for i in 0..p {
            rhs[i] += row[i] * g;
            for j in 0..=i {
                gram[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            gram[(j, i)] = gram[(i, j)];
        }
    }
    let (beta, ridged) = match gram.clone().cholesky() {
        Some(ch) => (ch.solve(&rhs), false),
        None => {
            let ridge = gram + DMatrix::<f64>::identity(p, p) * RIDGE;
            let ch = ridge
                .clone()
                .cholesky()
                .or_else(|| (ridge + DMatrix::<f64>::identity(p, p) * 1e-4).cholesky())
                .expect("ridge regularized gram matrix is positive definite");
            (ch.solve(&rhs), true)
        }
    };
    Ok(LinearFit {
        intercept: beta[0],
        coef: beta.iter().skip(1).copied().collect(),
        ridged,
    })
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Zero-mean Gaussian noise with scale `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianNoiseModel {
    pub sigma: f64,
    /// All sale indicators were identical, so the likelihood was flat.
    pub degenerate: bool,
}

impl CdfModel for GaussianNoiseModel {
    fn cdf(&self, z: f64) -> f64 {
        std_normal_cdf(z / self.sigma)
    }

    fn density(&self, z: f64) -> Option<f64> {
        Some(std_normal_pdf(z / self.sigma) / self.sigma)
    }
}

/// Bernoulli log-likelihood of the sale indicators under `N(0, sigma^2)` noise.
pub fn gaussian_log_likelihood(residuals: &[f64], sales: &[bool], sigma: f64) -> f64 {
    residuals
        .iter()
        .zip(sales)
        .map(|(&r, &sold)| {
            let u = r / sigma;
            // P(sale) = 1 - Phi(u) = Phi(-u)
            let prob = if sold { std_normal_cdf(-u) } else { std_normal_cdf(u) };
            prob.max(f64::MIN_POSITIVE).ln()
        })
        .sum()
}

/// Grid of 64 log-spaced scales on `[0.05, 5]`.
pub fn sigma_grid() -> Vec<f64> {
    let (a, b) = (SIGMA_MIN.ln(), SIGMA_MAX.ln());
    (0..SIGMA_GRID)
        .map(|i| (a + (b - a) * i as f64 / (SIGMA_GRID - 1) as f64).exp())
        .collect()
}

/// Profile MLE of the Gaussian scale given the linear mean fit.
pub fn fit_gaussian_sigma(sample: &LabeledSample, fit: &LinearFit) -> Result<GaussianNoiseModel> {
    let d = sample.dimension();
    if sample.len() < d + 2 {
        return Err(Error::TooFewObservations {
            n: sample.len(),
            need: d + 2,
        });
    }
    let sales = sample.sales();
    if sales.iter().all(|&s| s == sales[0]) {
        return Ok(GaussianNoiseModel {
            sigma: (SIGMA_MIN * SIGMA_MAX).sqrt(),
            degenerate: true,
        });
    }
    let residuals: Vec<f64> = sample.contexts().zip(sample.prices()).map(|(x, &p)| p - fit.predict(x)).collect();
    let loglik = |log_sigma: f64| gaussian_log_likelihood(&residuals, sales, log_sigma.exp());
    let grid: Vec<f64> = sigma_grid().iter().map(|s| s.ln()).collect();
    let (best, best_val) = grid
        .iter()
        .map(|&l| loglik(l))
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (arg, val) = golden_section_max(loglik, lo, hi, 1e-10);
    let log_sigma = if val >= best_val { arg } else { grid[best] };
    Ok(GaussianNoiseModel {
        sigma: log_sigma.exp(),
        degenerate: false,
    })
}

/// Episodic loop with a linear mean and the kernel noise CDF.
pub fn linear_kernel_policy(env: &MarketEnvironment, config: &PolicyConfig, rng: &mut RngStreams, trial: usize) -> Result<RegretTrace> {
    run_episodic(env, config, rng, trial, |buffer| {
        let fit = fit_linear(buffer)?;
        kernel_plugin(buffer, fit, env, config)
    })
}

/// Episodic loop with a linear mean and Gaussian noise of fitted scale,
/// inverted on `[-6 sigma, 6 sigma]`.
pub fn rmlp2_policy(env: &MarketEnvironment, config: &PolicyConfig, rng: &mut RngStreams, trial: usize) -> Result<RegretTrace> {
    run_episodic(env, config, rng, trial, |buffer| {
        let fit = fit_linear(buffer)?;
        let noise = fit_gaussian_sigma(buffer, &fit)?;
        let w = 6.0 * noise.sigma;
        let phi = PhiFunction::new(noise, config.eps_floor, -w, w)?;
        Ok(Box::new(PlugInPricer {
            mean: fit,
            phi,
            price_bound: env.price_bound(),
        }))
    })
}
