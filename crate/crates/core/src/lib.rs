//! Contextual dynamic pricing with a nonparametric mean utility and a
//! nonparametric market-noise distribution.
//!
//! The crate is organized bottom-up:
//!
//! * [`market_env`]: synthetic ground-truth markets and oracle quantities.
//! * [`nn_regress`]: distributional nearest neighbors (DNN) and its two-scale
//!   bias-corrected variant (TDNN).
//! * [`noise_cdf`]: Nadaraya-Watson estimation of the noise CDF and its
//!   derivative from exploration data.
//! * [`policy`]: the virtual-valuation map, its numeric inverse, episode
//!   scheduling and the explore-then-commit pricing loop.
//! * [`baselines`]: linear-utility comparison policies.
//! * [`harness`]: multi-trial orchestration, regret aggregation and CSV/JSON
//!   output.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod market_env;
pub mod nn_regress;
pub mod noise_cdf;
pub mod policy;

mod optim;

pub use error::{Error, Result};
