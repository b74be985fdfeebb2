//! The virtual-valuation map `phi(z) = z - (1 - F(z)) / F'(z)` and its
//! numeric inverse.
//!
//! The optimal price for mean utility `v` is `v + phi^{-1}(-v)`. Inversion
//! runs damped Newton on `y` after substituting `x(y) = c - h tanh(y/2)`,
//! which maps the real line onto the open working interval `(lo, hi)`.
//! When Newton fails, a grid scan picks the leftmost sign change and
//! bisects it. Targets outside the range of `phi` clamp to an endpoint.

use crate::noise_cdf::CdfModel;
use crate::{Error, Result};

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-9;
const NEWTON_STEP: f64 = 1e-5;
const SCAN_POINTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InversionPath {
    Newton,
    /// Grid scan + bisection after Newton failed.
    Fallback,
    /// Target below the range of `phi`; returned `lo`.
    ClampedLow,
    /// Target above the range of `phi`; returned `hi`.
    ClampedHigh,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub value: f64,
    pub path: InversionPath,
}

impl Inversion {
    pub fn clamped(&self) -> bool {
        matches!(self.path, InversionPath::ClampedLow | InversionPath::ClampedHigh)
    }
}

/// Counters for inversion events across a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct InversionStats {
    pub newton: u64,
    pub fallback: u64,
    pub clamped: u64,
}

impl InversionStats {
    pub fn record(&mut self, inv: &Inversion) {
        match inv.path {
            InversionPath::Newton => self.newton += 1,
            InversionPath::Fallback => self.fallback += 1,
            InversionPath::ClampedLow | InversionPath::ClampedHigh => self.clamped += 1,
        }
    }

    pub fn merge(&mut self, other: &InversionStats) {
        self.newton += other.newton;
        self.fallback += other.fallback;
        self.clamped += other.clamped;
    }
}

/// `phi` built from a CDF model, with the density floored at `floor` on
/// `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct PhiFunction<M> {
    model: M,
    floor: f64,
    lo: f64,
    hi: f64,
}

impl<M: CdfModel> PhiFunction<M> {
    pub fn new(model: M, floor: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(Error::config("eps_floor", "must be positive"));
        }
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::config("working_interval", format!("need lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { model, floor, lo, hi })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    /// Floored density; a model without information at `z` gets the floor.
    pub fn floored_density(&self, z: f64) -> f64 {
        self.model.density(z).unwrap_or(0.0).max(self.floor)
    }

    pub fn eval(&self, z: f64) -> f64 {
        z - (1.0 - self.model.cdf(z)) / self.floored_density(z)
    }

    fn x_of_y(&self, y: f64) -> f64 {
        let c = 0.5 * (self.lo + self.hi);
        let h = 0.5 * (self.hi - self.lo);
        c - h * (0.5 * y).tanh()
    }

    fn newton(&self, target: f64) -> Option<f64> {
        let g = |y: f64| self.eval(self.x_of_y(y)) - target;
        let mut y = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let gy = g(y);
            if !gy.is_finite() {
                return None;
            }
            if gy.abs() <= NEWTON_TOL {
                return Some(self.x_of_y(y));
            }
            let slope = (g(y + NEWTON_STEP) - g(y - NEWTON_STEP)) / (2.0 * NEWTON_STEP);
            if !slope.is_finite() || slope == 0.0 {
                return None;
            }
            // halve the step until the residual shrinks
            let mut step = gy / slope;
            let mut next = y - step;
            let mut tries = 0;
            while g(next).abs().partial_cmp(&gy.abs()) != Some(std::cmp::Ordering::Less) {
                tries += 1;
                if tries > 40 {
                    return None;
                }
                step *= 0.5;
                next = y - step;
            }
            y = next;
        }
        None
    }

    fn scan_and_bisect(&self, target: f64) -> Inversion {
        let step = (self.hi - self.lo) / (SCAN_POINTS - 1) as f64;
        let point = |i: usize| if i == SCAN_POINTS - 1 { self.hi } else { self.lo + step * i as f64 };
        let g = |x: f64| self.eval(x) - target;
        let values: Vec<f64> = (0..SCAN_POINTS).map(|i| g(point(i))).collect();
        for i in 0..SCAN_POINTS {
            if values[i] == 0.0 {
                return Inversion {
                    value: point(i),
                    path: InversionPath::Fallback,
                };
            }
            if i + 1 < SCAN_POINTS && values[i].signum() != values[i + 1].signum() {
                let (mut a, mut b) = (point(i), point(i + 1));
                let mut ga = values[i];
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if mid <= a || mid >= b {
                        break;
                    }
                    let gm = g(mid);
                    if gm == 0.0 {
                        a = mid;
                        b = mid;
                        break;
                    }
                    if gm.signum() == ga.signum() {
                        a = mid;
                        ga = gm;
                    } else {
                        b = mid;
                    }
                }
                let value = if g(a).abs() <= g(b).abs() { a } else { b };
                return Inversion {
                    value,
                    path: InversionPath::Fallback,
                };
            }
        }
        // no sign change: phi - target keeps one sign on the whole interval
        if values[0] > 0.0 {
            Inversion {
                value: self.lo,
                path: InversionPath::ClampedLow,
            }
        } else {
            Inversion {
                value: self.hi,
                path: InversionPath::ClampedHigh,
            }
        }
    }

    /// Solves `phi(x) = target` on the working interval. Total: never fails.
    pub fn inverse(&self, target: f64) -> Inversion {
        match self.newton(target) {
            Some(value) => Inversion {
                value,
                path: InversionPath::Newton,
            },
            None => self.scan_and_bisect(target),
        }
    }
}

/// Price `clip(v + phi^{-1}(-v), 0, B)` with the inversion record.
pub fn price_map<M: CdfModel>(phi: &PhiFunction<M>, mean: f64, price_bound: f64) -> (f64, Inversion) {
    let inv = phi.inverse(-mean);
    ((mean + inv.value).clamp(0.0, price_bound), inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_env::{MarketEnvironment, NoiseLaw, NoiseSpec};

    fn true_phi() -> PhiFunction<NoiseSpec> {
        PhiFunction::new(NoiseSpec::quartic_sim(), 1e-3, -1.0, 1.0).unwrap()
    }

    #[test]
    fn eval_examples() {
        let phi = true_phi();
        assert!((phi.eval(0.0) + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(phi.eval(0.5), 0.5);
        assert_eq!(phi.eval(0.8), 0.8);
        // 0.4 - (1 - 0.972) / 0.54
        assert!((phi.eval(0.4) - (0.4 - 0.028 / 0.54)).abs() < 1e-12);
        assert!((phi.eval(0.4) - 0.348_148).abs() < 1e-6);
    }

    #[test]
    fn monotone_on_working_interval() {
        let phi = true_phi();
        let grid: Vec<f64> = (0..512).map(|i| phi.eval(-1.0 + 2.0 * i as f64 / 511.0)).collect();
        assert!(grid.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn inverse_examples() {
        let phi = true_phi();
        let inv = phi.inverse(-1.0 / 3.0);
        assert!(inv.value.abs() < 1e-9);
        assert!(!inv.clamped());

        let high = phi.inverse(1.5);
        assert_eq!(high.path, InversionPath::ClampedHigh);
        assert_eq!(high.value, 1.0);
        let low = phi.inverse(-5000.0);
        assert_eq!(low.path, InversionPath::ClampedLow);
        assert_eq!(low.value, -1.0);
    }

    #[test]
    fn round_trip_interior_targets() {
        let phi = true_phi();
        for i in 0..50 {
            let target = -6.4 + 6.8 * i as f64 / 49.0;
            let inv = phi.inverse(target);
            assert!(!inv.clamped(), "target {target}");
            assert!((phi.eval(inv.value) - target).abs() <= 1e-8, "target {target}: {inv:?}");
        }
    }

    #[test]
    fn fallback_picks_leftmost_root() {
        // F with a flat step makes phi non-monotone; the scan must return
        // the smallest solution.
        struct Bumpy;
        impl CdfModel for Bumpy {
            fn cdf(&self, _z: f64) -> f64 {
                0.5
            }
            fn density(&self, z: f64) -> Option<f64> {
                Some(0.5 / (z.sin() * 3.0).abs().clamp(0.5, 10.0))
            }
        }
        let phi = PhiFunction::new(Bumpy, 1e-3, -3.0, 3.0).unwrap();
        let target = phi.eval(-2.0);
        let inv = phi.scan_and_bisect(target);
        let xs: Vec<f64> = (0..100_000).map(|i| -3.0 + 6.0 * i as f64 / 99_999.0).collect();
        let first_crossing = xs
            .windows(2)
            .find(|w| (phi.eval(w[0]) - target).signum() != (phi.eval(w[1]) - target).signum())
            .unwrap()[0];
        assert!((inv.value - first_crossing).abs() < 1e-3, "{} vs {first_crossing}", inv.value);
        assert!((phi.eval(inv.value) - target).abs() < 1e-8);
    }

    #[test]
    fn price_map_examples() {
        let phi = true_phi();
        let (p, _) = price_map(&phi, 1.0 / 3.0, 6.5);
        assert!((p - 1.0 / 3.0).abs() < 1e-9);
        let (p, _) = price_map(&phi, 10.0, 6.5);
        assert_eq!(p, 6.5);
        // inverse clamps at -4, so the raw price 1 - 4 is negative
        let steep = PhiFunction::new(NoiseSpec::quartic_sim(), 1e-3, -5.0, -4.0).unwrap();
        let (p, _) = price_map(&steep, 1.0, 6.5);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn plug_in_true_map_matches_revenue_oracle() {
        let env = MarketEnvironment::quadratic_sim();
        let phi = true_phi();
        for i in 0..=60 {
            let v = 0.1 * i as f64;
            let (p, _) = price_map(&phi, v, env.price_bound());
            let (_, best) = env.oracle_at_mean(v);
            assert!(best - env.revenue_at_mean(v, p) < 1e-9, "v={v}");
        }
    }

    #[test]
    fn gaussian_like_law_needs_no_fallback() {
        let spec = NoiseSpec::new(NoiseLaw::TruncatedGaussian {
            sigma: 0.3,
            half_width: 1.5,
        })
        .unwrap();
        let phi = PhiFunction::new(spec, 1e-3, -2.0, 2.0).unwrap();
        let mut stats = InversionStats::default();
        for i in 0..40 {
            let inv = phi.inverse(-0.1 * i as f64);
            stats.record(&inv);
        }
        assert_eq!(stats.fallback, 0);
        assert_eq!(stats.clamped, 0);
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(PhiFunction::new(NoiseSpec::quartic_sim(), 0.0, -1.0, 1.0).is_err());
        assert!(PhiFunction::new(NoiseSpec::quartic_sim(), 1e-3, 1.0, 1.0).is_err());
    }
}
