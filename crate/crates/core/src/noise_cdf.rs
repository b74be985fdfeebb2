//! Kernel estimation of the market-noise CDF.
//!
//! With uniform exploration prices, `F(z) = 1 - E[y | p - mu(x) = z]`, so a
//! Nadaraya-Watson regression of the sale indicator on the residual
//! `p_t - mu_hat(x_t)` estimates `F`. Its derivative follows from the
//! quotient rule on the two kernel sums.

use serde::{Deserialize, Serialize};

use crate::nn_regress::{LabeledSample, MeanEstimator};
use crate::{Error, Result};

/// A distribution seen through its CDF and density.
pub trait CdfModel {
    fn cdf(&self, z: f64) -> f64;

    /// `None` when the model carries no information at `z`.
    fn density(&self, z: f64) -> Option<f64>;
}

impl<T: CdfModel + ?Sized> CdfModel for &T {
    fn cdf(&self, z: f64) -> f64 {
        (**self).cdf(z)
    }

    fn density(&self, z: f64) -> Option<f64> {
        (**self).density(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelShape {
    /// `(1 - 11/3 u^2)(1 - u^2)^3` on `|u| <= 1/2`.
    Sim,
    /// `3/4 (1 - u^2)` on `|u| <= 1`.
    Epanechnikov,
}

/// Kernel shape times a positive constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub shape: KernelShape,
    pub scale: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::sim()
    }
}

impl KernelSpec {
    pub fn sim() -> Self {
        Self {
            shape: KernelShape::Sim,
            scale: 1.0,
        }
    }

    pub fn epanechnikov() -> Self {
        Self {
            shape: KernelShape::Epanechnikov,
            scale: 1.0,
        }
    }

    pub fn scaled(self, c: f64) -> Self {
        Self {
            scale: self.scale * c,
            ..self
        }
    }

    /// Support is `[-half_width, half_width]`.
    pub fn half_width(&self) -> f64 {
        match self.shape {
            KernelShape::Sim => 0.5,
            KernelShape::Epanechnikov => 1.0,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        if u.abs() > self.half_width() {
            return 0.0;
        }
        let u2 = u * u;
        let raw = match self.shape {
            KernelShape::Sim => (1.0 - 11.0 / 3.0 * u2) * (1.0 - u2).powi(3),
            KernelShape::Epanechnikov => 0.75 * (1.0 - u2),
        };
        self.scale * raw
    }

    pub fn deriv(&self, u: f64) -> f64 {
        if u.abs() > self.half_width() {
            return 0.0;
        }
        let u2 = u * u;
        let raw = match self.shape {
            KernelShape::Sim => {
                let c = 1.0 - u2;
                -22.0 / 3.0 * u * c.powi(3) - 6.0 * u * (1.0 - 11.0 / 3.0 * u2) * c * c
            }
            KernelShape::Epanechnikov => -1.5 * u,
        };
        self.scale * raw
    }
}

/// `c * n^{-1/(2m+1)}`.
pub fn bandwidth(n_exp: usize, m: u32, c: f64) -> f64 {
    c * (n_exp as f64).powf(-1.0 / (2 * m + 1) as f64)
}

/// The kernel sums `a`, `xi` and their derivatives in `z`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NwComponents {
    pub a: f64,
    pub xi: f64,
    pub a_deriv: f64,
    pub xi_deriv: f64,
}

/// Direct evaluation of `(a, xi)` from exploration data and a mean estimator.
pub fn nw_components<M: MeanEstimator + ?Sized>(data: &LabeledSample, mean: &M, kernel: &KernelSpec, z: f64, b: f64) -> (f64, f64) {
    let n = data.len() as f64;
    let (mut a, mut xi) = (0.0, 0.0);
    for (i, x) in data.contexts().enumerate() {
        let k = kernel.eval((data.prices()[i] - mean.predict(x) - z) / b);
        xi += k;
        if data.sales()[i] {
            a += k;
        }
    }
    (a / (n * b), xi / (n * b))
}

/// A fitted Nadaraya-Watson CDF estimate. Residuals are kept sorted so a
/// query only touches the points inside its kernel window.
#[derive(Debug, Clone)]
pub struct CdfEstimate {
    residuals: Vec<f64>,
    sales: Vec<bool>,
    bandwidth: f64,
    kernel: KernelSpec,
}

impl CdfEstimate {
    pub fn from_residuals(residuals: Vec<f64>, sales: Vec<bool>, bandwidth: f64, kernel: KernelSpec) -> Result<Self> {
        if residuals.len() != sales.len() {
            return Err(Error::DimensionMismatch {
                expected: residuals.len(),
                actual: sales.len(),
            });
        }
        if residuals.is_empty() {
            return Err(Error::EmptySample);
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::config("bandwidth_c", "bandwidth must be positive"));
        }
        let mut pairs: Vec<(f64, bool)> = residuals.into_iter().zip(sales).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (residuals, sales) = pairs.into_iter().unzip();
        Ok(Self {
            residuals,
            sales,
            bandwidth,
            kernel,
        })
    }

    /// Residuals `p_t - mean(x_t)` over the sample.
    pub fn fit<M: MeanEstimator + ?Sized>(data: &LabeledSample, mean: &M, bandwidth: f64, kernel: KernelSpec) -> Result<Self> {
        let residuals = data.contexts().zip(data.prices()).map(|(x, &p)| p - mean.predict(x)).collect();
        Self::from_residuals(residuals, data.sales().to_vec(), bandwidth, kernel)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    pub fn components(&self, z: f64) -> NwComponents {
        let b = self.bandwidth;
        let reach = b * self.kernel.half_width();
        let start = self.residuals.partition_point(|&r| r < z - reach);
        let end = self.residuals.partition_point(|&r| r <= z + reach);
        let mut c = NwComponents::default();
        for (&r, &sold) in self.residuals[start..end].iter().zip(&self.sales[start..end]) {
            let u = (r - z) / b;
            let k = self.kernel.eval(u);
            let dk = self.kernel.deriv(u);
            c.xi += k;
            c.xi_deriv += dk;
            if sold {
                c.a += k;
                c.a_deriv += dk;
            }
        }
        let nb = self.residuals.len() as f64 * b;
        c.a /= nb;
        c.xi /= nb;
        c.a_deriv /= -nb * b;
        c.xi_deriv /= -nb * b;
        c
    }

    /// `1 - a/xi`, clamped; outside the data window the estimate is extended
    /// by the nearest residual's outcome (0 below all residuals, 1 above).
    pub fn cdf(&self, z: f64) -> f64 {
        let c = self.components(z);
        if c.xi > 0.0 {
            return (1.0 - c.a / c.xi).clamp(0.0, 1.0);
        }
        self.boundary_value(z)
    }

    fn boundary_value(&self, z: f64) -> f64 {
        let first = self.residuals[0];
        let last = self.residuals[self.residuals.len() - 1];
        if z < first {
            return 0.0;
        }
        if z > last {
            return 1.0;
        }
        let idx = self.residuals.partition_point(|&r| r < z);
        let nearest = if idx == 0 {
            0
        } else if idx >= self.residuals.len() || z - self.residuals[idx - 1] <= self.residuals[idx] - z {
            idx - 1
        } else {
            idx
        };
        if self.sales[nearest] {
            0.0
        } else {
            1.0
        }
    }

    /// Raw derivative `-(a' xi - a xi') / xi^2`; `None` outside the data window.
    pub fn cdf_derivative(&self, z: f64) -> Option<f64> {
        let c = self.components(z);
        if c.xi > 0.0 {
            Some(-(c.a_deriv * c.xi - c.a * c.xi_deriv) / (c.xi * c.xi))
        } else {
            None
        }
    }
}

impl CdfModel for CdfEstimate {
    fn cdf(&self, z: f64) -> f64 {
        CdfEstimate::cdf(self, z)
    }

    fn density(&self, z: f64) -> Option<f64> {
        self.cdf_derivative(z)
    }
}
