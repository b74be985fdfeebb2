//! Distributional nearest neighbors.
//!
//! The DNN estimator at scale `s` averages the 1-NN estimate over every
//! size-`s` subsample. It collapses to an L-statistic: the `i`-th nearest
//! response gets weight `C(n-i, s-1) / C(n, s)`. TDNN combines two scales so
//! that the leading `s^{-2/d}` bias terms cancel.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest sample the brute-force U-statistic will enumerate.
pub const USTAT_MAX_N: usize = 20;

/// Exploration records: contexts, responses `g_t`, posted prices and sales.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledSample {
    dim: usize,
    contexts: Vec<f64>,
    responses: Vec<f64>,
    prices: Vec<f64>,
    sales: Vec<bool>,
}

impl LabeledSample {
    pub fn new(dim: usize) -> Self {
        Self { dim, ..Default::default() }
    }

    /// Records a market observation with response `g = B * y`.
    pub fn push_observation(&mut self, context: &[f64], price: f64, sale: bool, price_bound: f64) {
        let response = if sale { price_bound } else { 0.0 };
        self.push_raw(context, response, price, sale);
    }

    /// Records an arbitrary response; used for regression on noiseless targets.
    pub fn push_raw(&mut self, context: &[f64], response: f64, price: f64, sale: bool) {
        assert_eq!(context.len(), self.dim, "context dimension");
        self.contexts.extend_from_slice(context);
        self.responses.push(response);
        self.prices.push(price);
        self.sales.push(sale);
    }

    /// Regression-only sample (prices zero, sales false).
    pub fn from_regression(dim: usize, contexts: &[Vec<f64>], responses: &[f64]) -> Result<Self> {
        if contexts.len() != responses.len() {
            return Err(Error::DimensionMismatch {
                expected: contexts.len(),
                actual: responses.len(),
            });
        }
        let mut out = Self::new(dim);
        for (x, &g) in contexts.iter().zip(responses) {
            if x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: x.len(),
                });
            }
            out.push_raw(x, g, 0.0, false);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn context(&self, i: usize) -> &[f64] {
        &self.contexts[i * self.dim..(i + 1) * self.dim]
    }

    pub fn contexts(&self) -> impl Iterator<Item = &[f64]> {
        self.contexts.chunks_exact(self.dim.max(1))
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn sales(&self) -> &[bool] {
        &self.sales
    }

    /// Same contexts, new responses.
    pub fn with_responses(&self, responses: Vec<f64>) -> Self {
        assert_eq!(responses.len(), self.len());
        Self { responses, ..self.clone() }
    }

    fn check_query(&self, query: &[f64]) -> Result<()> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        Ok(())
    }

    fn sq_dist(&self, i: usize, query: &[f64]) -> f64 {
        self.context(i).iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Anything that maps a context to a mean-utility estimate.
pub trait MeanEstimator {
    fn predict(&self, x: &[f64]) -> f64;
}

/// Indices (0-based) sorted by Euclidean distance to `query`; ties go to the
/// smaller index.
pub fn order_by_distance(sample: &LabeledSample, query: &[f64]) -> Result<Vec<usize>> {
    sample.check_query(query)?;
    Ok(sorted_order(sample, query))
}

fn sorted_order(sample: &LabeledSample, query: &[f64]) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = (0..sample.len()).map(|i| (sample.sq_dist(i, query), i)).collect();
    keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// L-statistic weights `w_i = C(n-i, s-1) / C(n, s)` for ranks `i = 1..n`.
///
/// Uses the ratio recurrence `w_1 = s/n`, `w_{i+1} = w_i (n-i-s+1)/(n-i)`;
/// ranks beyond `n-s+1` get zero weight.
pub fn dnn_weights(n: usize, s: usize) -> Result<Vec<f64>> {
    if s == 0 || s > n {
        return Err(Error::ScaleOutOfRange { s, n });
    }
    let mut w = vec![0.0; n];
    let last = n - s + 1;
    w[0] = s as f64 / n as f64;
    for i in 1..last {
        // w[i] holds rank i+1
        w[i] = w[i - 1] * ((n - i - s + 1) as f64 / (n - i) as f64);
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnnConfig {
    pub scale: usize,
}

/// Two-scale configuration with its bias-cancelling coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdnnConfig {
    pub s1: usize,
    pub s2: usize,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl TdnnConfig {
    pub fn new(s1: usize, s2: usize, d: usize) -> Result<Self> {
        let (alpha1, alpha2) = tdnn_coefficients(s1, s2, d)?;
        Ok(Self { s1, s2, alpha1, alpha2 })
    }
}

/// Solves `a1 + a2 = 1`, `a1 s1^{-2/d} + a2 s2^{-2/d} = 0`.
pub fn tdnn_coefficients(s1: usize, s2: usize, d: usize) -> Result<(f64, f64)> {
    if s1 == 0 || s2 == 0 {
        return Err(Error::ScaleOutOfRange { s: 0, n: s1.max(s2) });
    }
    if s1 == s2 {
        return Err(Error::EqualScales(s1));
    }
    let ratio = (s1 as f64 / s2 as f64).powf(-2.0 / d as f64);
    Ok((1.0 / (1.0 - ratio), -ratio / (1.0 - ratio)))
}

fn weighted_sum(sample: &LabeledSample, query: &[f64], weights: &[f64]) -> f64 {
    let g = sample.responses();
    sorted_order(sample, query).into_iter().zip(weights).map(|(i, &w)| w * g[i]).sum()
}

fn check_scale(sample: &LabeledSample, s: usize) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if s == 0 || s > sample.len() {
        return Err(Error::ScaleOutOfRange { s, n: sample.len() });
    }
    Ok(())
}

pub fn dnn_predict(sample: &LabeledSample, query: &[f64], config: DnnConfig) -> Result<f64> {
    check_scale(sample, config.scale)?;
    sample.check_query(query)?;
    let w = dnn_weights(sample.len(), config.scale)?;
    Ok(weighted_sum(sample, query, &w))
}

/// Average of the subsample 1-NN response over all `C(n, s)` subsamples.
/// Test oracle; refuses `n > 20`.
pub fn dnn_predict_ustat(sample: &LabeledSample, query: &[f64], s: usize) -> Result<f64> {
    check_scale(sample, s)?;
    sample.check_query(query)?;
    if sample.len() > USTAT_MAX_N {
        return Err(Error::EnumerationTooLarge {
            n: sample.len(),
            max: USTAT_MAX_N,
        });
    }
    let g = sample.responses();
    let mut total = 0.0;
    let mut count = 0usize;
    for subset in (0..sample.len()).combinations(s) {
        let nearest = subset
            .into_iter()
            .min_by(|&a, &b| sample.sq_dist(a, query).total_cmp(&sample.sq_dist(b, query)).then(a.cmp(&b)))
            .expect("s >= 1");
        total += g[nearest];
        count += 1;
    }
    Ok(total / count as f64)
}

pub fn tdnn_predict(sample: &LabeledSample, query: &[f64], config: TdnnConfig) -> Result<f64> {
    let a = dnn_predict(sample, query, DnnConfig { scale: config.s1 })?;
    let b = dnn_predict(sample, query, DnnConfig { scale: config.s2 })?;
    Ok(config.alpha1 * a + config.alpha2 * b)
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// DNN scale `round(n^{d/(d+4)})`, clamped to `[1, n]`.
pub fn choose_dnn_scale(n: usize, d: usize) -> DnnConfig {
    let d = d as f64;
    let s = round_half_up((n as f64).powf(d / (d + 4.0)));
    DnnConfig {
        scale: s.clamp(1, n.max(1)),
    }
}

/// TDNN scales `s1 = round(n^{max(d/(d+8), 1/7)})`, `s2 = 2 s1`.
///
/// When `2 s1` would exceed `n`, `s1` is lowered to `n/2` so the ratio stays
/// at two.
pub fn choose_tdnn_scales(n: usize, d: usize) -> Result<TdnnConfig> {
    if n < 2 {
        return Err(Error::ScaleOutOfRange { s: 2, n });
    }
    let df = d as f64;
    let exponent = (df / (df + 8.0)).max(1.0 / 7.0);
    let s1 = round_half_up((n as f64).powf(exponent)).clamp(1, n / 2);
    TdnnConfig::new(s1, 2 * s1, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Dnn,
    Tdnn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleConfig {
    Dnn(DnnConfig),
    Tdnn(TdnnConfig),
}

pub fn choose_scales(n: usize, d: usize, kind: EstimatorKind) -> Result<ScaleConfig> {
    match kind {
        EstimatorKind::Dnn => Ok(ScaleConfig::Dnn(choose_dnn_scale(n, d))),
        EstimatorKind::Tdnn => choose_tdnn_scales(n, d).map(ScaleConfig::Tdnn),
    }
}

/// A DNN or TDNN estimator bound to a sample, with its rank weights
/// precomputed. TDNN folds both scales into one weight vector.
#[derive(Debug, Clone)]
pub struct NnRegressor<'a> {
    sample: &'a LabeledSample,
    weights: Vec<f64>,
}

impl<'a> NnRegressor<'a> {
    pub fn fit(sample: &'a LabeledSample, config: ScaleConfig) -> Result<Self> {
        let weights = match config {
            ScaleConfig::Dnn(c) => {
                check_scale(sample, c.scale)?;
                dnn_weights(sample.len(), c.scale)?
            }
            ScaleConfig::Tdnn(c) => {
                check_scale(sample, c.s1)?;
                check_scale(sample, c.s2)?;
                let w1 = dnn_weights(sample.len(), c.s1)?;
                let w2 = dnn_weights(sample.len(), c.s2)?;
                w1.iter().zip(&w2).map(|(a, b)| c.alpha1 * a + c.alpha2 * b).collect()
            }
        };
        Ok(Self { sample, weights })
    }

    /// Fits with the default scale rule for the sample size.
    pub fn fit_auto(sample: &'a LabeledSample, kind: EstimatorKind) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::EmptySample);
        }
        let config = if sample.len() < 2 {
            ScaleConfig::Dnn(DnnConfig { scale: 1 })
        } else {
            choose_scales(sample.len(), sample.dimension(), kind)?
        };
        Self::fit(sample, config)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl MeanEstimator for NnRegressor<'_> {
    fn predict(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.sample.dimension());
        weighted_sum(self.sample, x, &self.weights)
    }
}
