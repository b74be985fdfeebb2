use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::policy::InversionStats;
use crate::{Error, Result};

pub const TRACE_HEADER: [&str; 10] = [
    "trial",
    "t",
    "episode",
    "phase",
    "price",
    "oracle_price",
    "exp_revenue",
    "oracle_revenue",
    "instant_regret",
    "cum_regret",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "exp")]
    Exploration,
    #[serde(rename = "com")]
    Commitment,
}

impl Phase {
    pub fn tag(&self) -> &'static str {
        match self {
            Phase::Exploration => "exp",
            Phase::Commitment => "com",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "exp" => Some(Phase::Exploration),
            "com" => Some(Phase::Commitment),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodRecord {
    pub t: usize,
    pub episode: usize,
    pub phase: Phase,
    pub price: f64,
    pub oracle_price: f64,
    pub exp_revenue: f64,
    pub oracle_revenue: f64,
    pub instant_regret: f64,
    pub cum_regret: f64,
}

/// Per-period pricing log of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub trial: usize,
    pub seed: u64,
    pub records: Vec<PeriodRecord>,
    pub inversions: InversionStats,
}

impl RegretTrace {
    pub fn new(trial: usize, seed: u64) -> Self {
        Self {
            trial,
            seed,
            records: Vec::new(),
            inversions: InversionStats::default(),
        }
    }

    /// Appends a period. Instant regret is `oracle_revenue - exp_revenue`,
    /// truncated at zero since the oracle search is only accurate to
    /// floating-point resolution.
    pub fn push(&mut self, episode: usize, phase: Phase, price: f64, oracle_price: f64, exp_revenue: f64, oracle_revenue: f64) {
        let instant = (oracle_revenue - exp_revenue).max(0.0);
        let cum = self.final_regret() + instant;
        self.records.push(PeriodRecord {
            t: self.records.len() + 1,
            episode,
            phase,
            price,
            oracle_price,
            exp_revenue,
            oracle_revenue,
            instant_regret: instant,
            cum_regret: cum,
        });
    }

    pub fn horizon(&self) -> usize {
        self.records.len()
    }

    /// `Reg(T)`, zero for an empty trace.
    pub fn final_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_regret)
    }

    pub fn cumulative(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.cum_regret).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(TRACE_HEADER).map_err(io)?;
        for r in &self.records {
            w.write_record([
                self.trial.to_string(),
                r.t.to_string(),
                r.episode.to_string(),
                r.phase.tag().to_string(),
                fmt17(r.price),
                fmt17(r.oracle_price),
                fmt17(r.exp_revenue),
                fmt17(r.oracle_revenue),
                fmt17(r.instant_regret),
                fmt17(r.cum_regret),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a trace written by [`RegretTrace::write_csv`]. The seed and
    /// inversion counters are not part of the CSV and come back as zero.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let parse_err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            reason,
        };
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        let header = rdr.headers().map_err(|e| parse_err(e.to_string()))?.clone();
        if header.iter().ne(TRACE_HEADER) {
            return Err(parse_err(format!("unexpected header {header:?}")));
        }
        let mut trace = RegretTrace::new(0, 0);
        for (line, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| parse_err(e.to_string()))?;
            let field = |i: usize| row.get(i).unwrap_or("");
            let float = |i: usize| {
                field(i)
                    .parse::<f64>()
                    .map_err(|e| parse_err(format!("row {}: {}: {e}", line + 2, TRACE_HEADER[i])))
            };
            let int = |i: usize| {
                field(i)
                    .parse::<usize>()
                    .map_err(|e| parse_err(format!("row {}: {}: {e}", line + 2, TRACE_HEADER[i])))
            };
            trace.trial = int(0)?;
            trace.records.push(PeriodRecord {
                t: int(1)?,
                episode: int(2)?,
                phase: Phase::parse(field(3)).ok_or_else(|| parse_err(format!("row {}: bad phase", line + 2)))?,
                price: float(4)?,
                oracle_price: float(5)?,
                exp_revenue: float(6)?,
                oracle_revenue: float(7)?,
                instant_regret: float(8)?,
                cum_regret: float(9)?,
            });
        }
        Ok(trace)
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
