use std::ops::RangeInclusive;

use super::trace::{Phase, RegretTrace};
use crate::{Error, Result};

pub const DEFAULT_T0: usize = 1500;

/// Cross-trial summary of one policy. Every per-`t` series has one entry
/// per period; entry `t - 1` belongs to period `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    pub trials: usize,
    pub mean: Vec<f64>,
    /// Standard error of the mean, `sd / sqrt(trials)`; zero for one trial.
    pub se: Vec<f64>,
    /// `mean Reg(t) / t`.
    pub ave_regret: Vec<f64>,
    /// Trial mean of the exploitation-phase running average; `None` before
    /// the first commitment period and at exploration periods.
    pub exploitation: Vec<Option<f64>>,
    /// Adjusted log-regret of the mean curve.
    pub adjusted: Vec<Option<f64>>,
    pub dimension: usize,
    pub t0: usize,
}

impl AggregateStats {
    pub fn horizon(&self) -> usize {
        self.mean.len()
    }

    pub fn final_regret(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }

    pub fn final_se(&self) -> f64 {
        self.se.last().copied().unwrap_or(0.0)
    }

    pub fn final_ave_regret(&self) -> f64 {
        self.ave_regret.last().copied().unwrap_or(0.0)
    }

    pub fn final_exploitation(&self) -> Option<f64> {
        self.exploitation.iter().rev().find_map(|v| *v)
    }
}

/// Reduces traces of equal horizon. `adjusted` stays all `None` when the
/// reference regret is not positive or `t0` lies past the horizon.
pub fn aggregate(traces: &[RegretTrace], dimension: usize, t0: usize) -> Result<AggregateStats> {
    let first = traces.first().ok_or(Error::EmptySample)?;
    let horizon = first.horizon();
    if let Some(bad) = traces.iter().find(|t| t.horizon() != horizon) {
        return Err(Error::DimensionMismatch {
            expected: horizon,
            actual: bad.horizon(),
        });
    }
    let n = traces.len() as f64;
    let mut mean = vec![0.0; horizon];
    let mut se = vec![0.0; horizon];
    for i in 0..horizon {
        let m = traces.iter().map(|t| t.records[i].cum_regret).sum::<f64>() / n;
        mean[i] = m;
        if traces.len() > 1 {
            let ss: f64 = traces.iter().map(|t| (t.records[i].cum_regret - m).powi(2)).sum();
            se[i] = (ss / (n - 1.0)).sqrt() / n.sqrt();
        }
    }
    let ave_regret = mean.iter().enumerate().map(|(i, r)| r / (i + 1) as f64).collect();

    let per_trial: Vec<Vec<Option<f64>>> = traces.iter().map(exploitation_by_period).collect();
    let exploitation = (0..horizon)
        .map(|i| {
            let vals: Option<Vec<f64>> = per_trial.iter().map(|s| s[i]).collect();
            vals.map(|v| v.iter().sum::<f64>() / n)
        })
        .collect();

    let adjusted = match adjusted_log_regret(&mean, dimension, t0) {
        Ok(series) => series,
        Err(_) => vec![None; horizon],
    };
    Ok(AggregateStats {
        trials: traces.len(),
        mean,
        se,
        ave_regret,
        exploitation,
        adjusted,
        dimension,
        t0,
    })
}

/// `log Reg(T) - 2 log log T - log(d log T)`.
fn log_level(reg: f64, t: f64, d: usize) -> f64 {
    let lt = t.ln();
    reg.ln() - 2.0 * lt.ln() - (d as f64 * lt).ln()
}

/// Adjusted log-regret at a single horizon `t`, referenced to `t0`.
pub fn adjusted_log_regret_at(reg_t: f64, t: f64, reg_t0: f64, t0: f64, d: usize) -> f64 {
    log_level(reg_t, t, d) - log_level(reg_t0, t0, d)
}

/// Adjusted log-regret of a cumulative series (`series[t - 1] = Reg(t)`).
/// Defined where `T >= 3` (so `log log T > 0`) and `Reg(T) > 0`.
pub fn adjusted_log_regret(series: &[f64], d: usize, t0: usize) -> Result<Vec<Option<f64>>> {
    if t0 < 3 || t0 > series.len() {
        return Err(Error::config("t0", format!("reference {t0} outside [3, {}]", series.len())));
    }
    let reg0 = series[t0 - 1];
    if reg0.is_nan() || reg0 <= 0.0 {
        return Err(Error::NonpositiveReference { t0, value: reg0 });
    }
    Ok(series
        .iter()
        .enumerate()
        .map(|(i, &reg)| {
            let t = i + 1;
            (t >= 3 && reg > 0.0).then(|| adjusted_log_regret_at(reg, t as f64, reg0, t0 as f64, d))
        })
        .collect())
}

/// Running mean of instant regret over commitment periods only.
pub fn exploitation_average(trace: &RegretTrace) -> Vec<f64> {
    exploitation_by_period(trace).into_iter().flatten().collect()
}

fn exploitation_by_period(trace: &RegretTrace) -> Vec<Option<f64>> {
    let mut sum = 0.0;
    let mut count = 0usize;
    trace
        .records
        .iter()
        .map(|r| {
            (r.phase == Phase::Commitment).then(|| {
                sum += r.instant_regret;
                count += 1;
                sum / count as f64
            })
        })
        .collect()
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ls_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::EmptyWindow);
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::EmptyWindow);
    }
    Ok(sxy / sxx)
}

/// Slope of the adjusted log-regret against `log T - log T0` over the
/// periods in `window`.
pub fn slope_diagnostic(stats: &AggregateStats, window: RangeInclusive<usize>) -> Result<f64> {
    slope_of_series(&stats.adjusted, stats.t0, window)
}

pub fn slope_of_series(adjusted: &[Option<f64>], t0: usize, window: RangeInclusive<usize>) -> Result<f64> {
    let (a, b) = (*window.start(), *window.end());
    if a == 0 || a > b || b > adjusted.len() {
        return Err(Error::EmptyWindow);
    }
    let lt0 = (t0 as f64).ln();
    let points: Vec<(f64, f64)> = (a..=b)
        .filter_map(|t| adjusted[t - 1].map(|y| ((t as f64).ln() - lt0, y)))
        .collect();
    ls_slope(&points)
}
