use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Rule for the exploration length inside an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplorationRule {
    /// `floor((d n_k)^{(2m+1)/(4m-1)})`
    Smoothness,
    /// `floor((d n_k)^{(d+4)/(d+8)})`
    Dimension,
    /// `floor((d n_k)^{max((2m+1)/(4m-1), (d+8)/(d+16), 7/13)})`
    Tdnn,
}

impl ExplorationRule {
    pub fn exponent(&self, d: usize, m: u32) -> f64 {
        let d = d as f64;
        let m = m as f64;
        let smooth = (2.0 * m + 1.0) / (4.0 * m - 1.0);
        match self {
            ExplorationRule::Smoothness => smooth,
            ExplorationRule::Dimension => (d + 4.0) / (d + 8.0),
            ExplorationRule::Tdnn => smooth.max((d + 8.0) / (d + 16.0)).max(7.0 / 13.0),
        }
    }
}

/// Exploration periods for an episode of length `n_k`, clamped to `[1, n_k - 1]`.
pub fn exploration_length(n_k: usize, d: usize, m: u32, rule: ExplorationRule) -> usize {
    let base = (d * n_k) as f64;
    // guard against powf landing just below an exact integer
    let raw = (base.powf(rule.exponent(d, m)) + 1e-9).floor() as usize;
    raw.clamp(1, n_k.saturating_sub(1).max(1))
}

/// One episode; `start` is the 1-based index of its first period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Episode {
    pub index: usize,
    pub start: usize,
    pub length: usize,
    pub exploration: usize,
}

impl Episode {
    pub fn commitment(&self) -> usize {
        self.length - self.exploration
    }

    /// Periods `start ..= start + exploration - 1`.
    pub fn exploration_periods(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.exploration
    }

    pub fn commitment_periods(&self) -> std::ops::Range<usize> {
        self.start + self.exploration..self.start + self.length
    }

    pub fn end(&self) -> usize {
        self.start + self.length - 1
    }
}

/// Consecutive episodes of length `n_k = 2^{k-1} n_0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeSchedule {
    episodes: Vec<Episode>,
}

impl EpisodeSchedule {
    pub fn new(n0: usize, count: usize, d: usize, m: u32, rule: ExplorationRule) -> Result<Self> {
        if n0 < 2 {
            return Err(Error::config("n0", "must be at least 2"));
        }
        if count == 0 {
            return Err(Error::config("episodes", "must be at least 1"));
        }
        if count > 40 {
            return Err(Error::config("episodes", "horizon overflows"));
        }
        let mut start = 1;
        let episodes = (1..=count)
            .map(|k| {
                let length = n0 << (k - 1);
                let ep = Episode {
                    index: k,
                    start,
                    length,
                    exploration: exploration_length(length, d, m, rule),
                };
                start += length;
                ep
            })
            .collect();
        Ok(Self { episodes })
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    /// Total number of periods `T`.
    pub fn horizon(&self) -> usize {
        self.episodes.iter().map(|e| e.length).sum()
    }
}
